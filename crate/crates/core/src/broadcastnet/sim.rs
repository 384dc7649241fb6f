use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{deliver, one_way_sync, two_way_transfer, Delivery, Label, LamportClock, Role, TimeSignal, Topology};
use crate::corrections::{CorrectionFamilies, CorrectionVector, PeriodicSource};
use crate::error::{Error, Result};
use crate::relkinematics::SECONDS_PER_DAY;
use crate::trace::{EventKind, TraceEvent};
use crate::truth::TruthTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyncMode {
    #[default]
    OneWay,
    TwoWay,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BroadcastConfig {
    /// Seconds between authority broadcasts.
    pub cadence: f64,
    pub sync_mode: SyncMode,
    /// Minimum gap between accepted syncs at one dependent; 0 accepts all.
    pub resync_interval: f64,
    /// Seconds between residual samples.
    pub sample_step: f64,
    /// Worst-pair disagreement below which an epoch counts as agreeing.
    pub agreement_threshold: f64,
    /// Whether dependents forward first-seen broadcasts to other dependents.
    pub relay: bool,
    /// Authority turnaround in a two-way exchange.
    pub turnaround: f64,
    pub periodic_source: PeriodicSource,
}

impl Default for BroadcastConfig {
    fn default() -> Self {
        Self {
            cadence: 10.0,
            sync_mode: SyncMode::OneWay,
            resync_interval: 0.0,
            sample_step: 60.0,
            agreement_threshold: 10e-9,
            relay: true,
            turnaround: 0.0,
            periodic_source: PeriodicSource::Fitted,
        }
    }
}

impl BroadcastConfig {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [("cadence", self.cadence), ("sample_step", self.sample_step)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("broadcast.{key} must be > 0 (got {v})")));
            }
        }
        for (key, v) in [
            ("resync_interval", self.resync_interval),
            ("agreement_threshold", self.agreement_threshold),
            ("turnaround", self.turnaround),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("broadcast.{key} must be ≥ 0 (got {v})")));
            }
        }
        if let PeriodicSource::Convention(c) = &self.periodic_source {
            c.validate()?;
        }
        Ok(())
    }
}

/// Everything a broadcast run needs except the correction vector.
#[derive(Debug, Clone)]
pub struct BroadcastSetup {
    truth: Arc<TruthTable>,
    topology: Topology,
    config: BroadcastConfig,
    seed: u64,
    families: Vec<Option<CorrectionFamilies>>,
    targets: Vec<Option<Vec<f64>>>,
}

impl BroadcastSetup {
    /// Node `i` of `topology` must be clock `i` of `truth`.
    pub fn new(truth: Arc<TruthTable>, topology: Topology, config: BroadcastConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let clocks = truth.clocks();
        if clocks.len() != topology.nodes().len() {
            return Err(Error::config("topology and clock list differ in length"));
        }
        for (c, n) in clocks.iter().zip(topology.nodes()) {
            if c.id != n.id || c.role != n.role {
                return Err(Error::config(format!(
                    "topology node {} does not match clock {}",
                    n.id, c.id
                )));
            }
        }
        let mut families = vec![None; clocks.len()];
        let mut targets = vec![None; clocks.len()];
        if topology.dependents().next().is_some() {
            let ensemble = truth
                .ensemble_offsets()
                .ok_or_else(|| Error::config("a broadcast network needs at least one authority"))?;
            for d in topology.dependents() {
                families[d] = Some(CorrectionFamilies::decompose(&truth, d, &config.periodic_source)?);
                targets[d] = Some(
                    (0..truth.len())
                        .map(|k| ensemble[k] - truth.displayed_offset(d, k))
                        .collect(),
                );
            }
        }
        Ok(Self {
            truth,
            topology,
            config,
            seed,
            families,
            targets,
        })
    }

    pub fn truth(&self) -> &TruthTable {
        &self.truth
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn config(&self) -> &BroadcastConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn families(&self, node: usize) -> Option<&CorrectionFamilies> {
        self.families[node].as_ref()
    }

    /// Run the event loop once with `corrections` applied at every dependent.
    pub fn run(&self, corrections: &CorrectionVector, record_trace: bool) -> Result<BroadcastRun> {
        corrections.validate()?;
        Sim::new(self, corrections, record_trace).run()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SyncStats {
    /// Over every (dependent, sample) pair after the dependent first synced.
    pub rms_sync_error: f64,
    /// Largest spread of residuals at one epoch, the ensemble counting as 0.
    pub max_pair_disagreement: f64,
    pub agreement_fraction: f64,
    /// Largest |drift of residual since last sync|, seconds per day.
    pub divergence_rate: f64,
    pub samples: usize,
    pub syncs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DependentSummary {
    pub node: usize,
    pub syncs: usize,
    pub samples: usize,
    pub rms_sync_error: f64,
    pub max_abs_residual: f64,
    /// Signed, seconds per day.
    pub divergence_rate: f64,
}

/// What an authority knows about itself at the end of a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuthorityState {
    pub node: usize,
    pub lamport: u64,
    pub emitted: u64,
    pub replies: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BroadcastRun {
    pub stats: SyncStats,
    pub dependents: Vec<DependentSummary>,
    pub authorities: Vec<AuthorityState>,
    pub trace: Vec<TraceEvent>,
}

enum Event {
    Tick(u64),
    Sample(u64),
    Arrive {
        node: usize,
        signal: TimeSignal,
    },
    Request {
        dependent: usize,
        authority: usize,
        link: usize,
        dependent_is_a: bool,
        t1: Label,
        stamp: u64,
    },
    Reply {
        dependent: usize,
        t1: Label,
        t2: Label,
        t3: Label,
        stamp: u64,
    },
}

struct Scheduled {
    t: f64,
    seq: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // Reversed so the max-heap pops the earliest event; ties go to the
    // event scheduled first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.t.total_cmp(&self.t).then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Default)]
struct DependentState {
    /// Estimate minus model at the last sync.
    base: Option<f64>,
    last_sync: f64,
    residual_at_sync: f64,
    last_seen: Vec<u64>,
    syncs: usize,
    samples: usize,
    sum_sq: f64,
    max_abs: f64,
    sxy: f64,
    sxx: f64,
}

struct Sim<'a> {
    setup: &'a BroadcastSetup,
    delay_scale: f64,
    models: Vec<Option<Vec<f64>>>,
    rng: ChaCha8Rng,
    queue: BinaryHeap<Scheduled>,
    seq: u64,
    lamport: Vec<LamportClock>,
    emitted: Vec<u64>,
    replies: Vec<u64>,
    dependents: Vec<DependentState>,
    trace: Option<Vec<TraceEvent>>,
    epochs_sampled: usize,
    epochs_agreeing: usize,
    max_spread: f64,
}

impl<'a> Sim<'a> {
    fn new(setup: &'a BroadcastSetup, v: &CorrectionVector, record_trace: bool) -> Self {
        let n = setup.topology.nodes().len();
        let models = setup
            .families
            .iter()
            .map(|f| f.as_ref().map(|f| f.combined(v)))
            .collect();
        let dependents = (0..n)
            .map(|_| DependentState {
                last_seen: vec![0; n],
                ..Default::default()
            })
            .collect();
        Self {
            setup,
            delay_scale: v.delay_scale,
            models,
            rng: ChaCha8Rng::seed_from_u64(setup.seed),
            queue: BinaryHeap::new(),
            seq: 0,
            lamport: vec![LamportClock::default(); n],
            emitted: vec![0; n],
            replies: vec![0; n],
            dependents,
            trace: record_trace.then(Vec::new),
            epochs_sampled: 0,
            epochs_agreeing: 0,
            max_spread: 0.0,
        }
    }

    fn push(&mut self, t: f64, event: Event) {
        self.seq += 1;
        self.queue.push(Scheduled {
            t,
            seq: self.seq,
            event,
        });
    }

    fn log(&mut self, event: TraceEvent) {
        if let Some(trace) = &mut self.trace {
            trace.push(event);
        }
    }

    fn ensemble(&self, t: f64) -> f64 {
        self.setup.truth.ensemble_offset_at(t).unwrap_or(0.0)
    }

    fn local(&self, node: usize, t: f64) -> Label {
        Label::new(t, self.setup.truth.displayed_offset_at(node, t))
    }

    fn target(&self, node: usize, t: f64) -> f64 {
        let series = self.setup.targets[node].as_ref().expect("dependent target");
        self.setup.truth.interpolate(series, t)
    }

    fn model(&self, node: usize, t: f64) -> f64 {
        let series = self.models[node].as_ref().expect("dependent model");
        self.setup.truth.interpolate(series, t)
    }

    fn may_sync(&self, node: usize, t: f64) -> bool {
        let st = &self.dependents[node];
        st.base.is_none() || t - st.last_sync >= self.setup.config.resync_interval
    }

    fn run(mut self) -> Result<BroadcastRun> {
        let end = self.setup.truth.end();
        self.push(0.0, Event::Tick(0));
        self.push(0.0, Event::Sample(0));
        while let Some(Scheduled { t, event, .. }) = self.queue.pop() {
            if t > end {
                break;
            }
            match event {
                Event::Tick(k) => self.tick(t, k, end),
                Event::Sample(k) => self.sample(t, k, end),
                Event::Arrive { node, signal } => self.arrive(t, node, signal),
                Event::Request {
                    dependent,
                    authority,
                    link,
                    dependent_is_a,
                    t1,
                    stamp,
                } => self.answer(t, dependent, authority, link, dependent_is_a, t1, stamp),
                Event::Reply {
                    dependent,
                    t1,
                    t2,
                    t3,
                    stamp,
                } => {
                    let lam = self.lamport[dependent].receive(stamp);
                    self.log(TraceEvent::new(t, dependent, EventKind::Reply).lamport(lam));
                    if self.may_sync(dependent, t) {
                        let t4 = self.local(dependent, t);
                        let estimate = two_way_transfer(t1, t2, t3, t4);
                        self.sync(t, dependent, estimate, lam);
                    }
                }
            }
        }
        Ok(self.finish())
    }

    fn tick(&mut self, t: f64, k: u64, end: f64) {
        let topo = &self.setup.topology;
        let authorities: Vec<usize> = topo.authorities().collect();
        for a in authorities {
            let neighbours: Vec<(usize, usize, bool)> = topo
                .neighbours(a)
                .iter()
                .copied()
                .filter(|&(_, nb, _)| topo.role(nb) == Role::Dependent)
                .collect();
            if neighbours.is_empty() {
                continue;
            }
            let stamp = self.lamport[a].send();
            self.emitted[a] += 1;
            let label = Label::new(t, self.ensemble(t));
            self.log(
                TraceEvent::new(t, a, EventKind::Emit)
                    .estimate(label.offset, None)
                    .lamport(stamp),
            );
            for (l, nb, from_a) in neighbours {
                let signal = TimeSignal {
                    origin: a,
                    emit_label: label,
                    lamport_stamp: stamp,
                    origin_stamp: stamp,
                    path: vec![a],
                    modeled_delay: topo.link(l).base_delay,
                };
                self.transmit(t, l, nb, from_a, signal);
            }
        }
        if self.setup.config.sync_mode == SyncMode::TwoWay {
            let dependents: Vec<usize> = topo.dependents().collect();
            for d in dependents {
                if !self.may_sync(d, t) {
                    continue;
                }
                let Some(&(l, auth, from_a)) = topo
                    .neighbours(d)
                    .iter()
                    .find(|&&(_, nb, _)| topo.role(nb) == Role::Authority)
                else {
                    continue;
                };
                let stamp = self.lamport[d].send();
                let t1 = self.local(d, t);
                self.log(TraceEvent::new(t, d, EventKind::Request).lamport(stamp));
                match deliver(topo.link(l), from_a, t, &mut self.rng) {
                    Delivery::Delivered { at } => self.push(
                        at,
                        Event::Request {
                            dependent: d,
                            authority: auth,
                            link: l,
                            dependent_is_a: from_a,
                            t1,
                            stamp,
                        },
                    ),
                    Delivery::Lost => self.log(TraceEvent::new(t, auth, EventKind::Lost)),
                    Delivery::Blocked => self.log(TraceEvent::new(t, auth, EventKind::Blocked)),
                }
            }
        }
        let next = (k + 1) as f64 * self.setup.config.cadence;
        if next <= end {
            self.push(next, Event::Tick(k + 1));
        }
    }

    fn transmit(&mut self, t: f64, link: usize, to: usize, from_a: bool, signal: TimeSignal) {
        match deliver(self.setup.topology.link(link), from_a, t, &mut self.rng) {
            Delivery::Delivered { at } => self.push(at, Event::Arrive { node: to, signal }),
            Delivery::Lost => self.log(TraceEvent::new(t, to, EventKind::Lost)),
            Delivery::Blocked => self.log(TraceEvent::new(t, to, EventKind::Blocked)),
        }
    }

    fn arrive(&mut self, t: f64, node: usize, signal: TimeSignal) {
        let lam = self.lamport[node].receive(signal.lamport_stamp);
        self.log(TraceEvent::new(t, node, EventKind::Deliver).lamport(lam));
        let st = &mut self.dependents[node];
        if signal.origin_stamp <= st.last_seen[signal.origin] {
            return;
        }
        st.last_seen[signal.origin] = signal.origin_stamp;
        if self.setup.config.sync_mode == SyncMode::OneWay && self.may_sync(node, t) {
            let assumed = self.delay_scale * signal.modeled_delay;
            let estimate = one_way_sync(signal.emit_label, assumed, self.local(node, t));
            self.sync(t, node, estimate, lam);
        }
        if self.setup.config.relay {
            let topo = &self.setup.topology;
            let onward: Vec<(usize, usize, bool)> = topo
                .neighbours(node)
                .iter()
                .copied()
                .filter(|&(_, nb, _)| topo.role(nb) == Role::Dependent && !signal.path.contains(&nb))
                .collect();
            for (l, nb, from_a) in onward {
                let mut path = signal.path.clone();
                path.push(node);
                let relayed = TimeSignal {
                    lamport_stamp: self.lamport[node].send(),
                    path,
                    modeled_delay: signal.modeled_delay + self.setup.topology.link(l).base_delay,
                    ..signal.clone()
                };
                self.transmit(t, l, nb, from_a, relayed);
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn answer(
        &mut self,
        t: f64,
        dependent: usize,
        authority: usize,
        link: usize,
        dep_is_a: bool,
        t1: Label,
        stamp: u64,
    ) {
        self.lamport[authority].receive(stamp);
        let t2 = Label::new(t, self.ensemble(t));
        let t3c = t + self.setup.config.turnaround;
        let t3 = Label::new(t3c, self.ensemble(t3c));
        let reply = self.lamport[authority].send();
        self.replies[authority] += 1;
        match deliver(self.setup.topology.link(link), !dep_is_a, t3c, &mut self.rng) {
            Delivery::Delivered { at } => self.push(
                at,
                Event::Reply {
                    dependent,
                    t1,
                    t2,
                    t3,
                    stamp: reply,
                },
            ),
            Delivery::Lost => self.log(TraceEvent::new(t3c, dependent, EventKind::Lost)),
            Delivery::Blocked => self.log(TraceEvent::new(t3c, dependent, EventKind::Blocked)),
        }
    }

    fn sync(&mut self, t: f64, node: usize, estimate: f64, lamport: u64) {
        let residual = self.target(node, t) - estimate;
        let model = self.model(node, t);
        let st = &mut self.dependents[node];
        st.base = Some(estimate - model);
        st.last_sync = t;
        st.residual_at_sync = residual;
        st.syncs += 1;
        self.log(
            TraceEvent::new(t, node, EventKind::Sync)
                .estimate(estimate, Some(residual))
                .lamport(lamport),
        );
    }

    fn sample(&mut self, t: f64, k: u64, end: f64) {
        let (mut lo, mut hi) = (0.0f64, 0.0f64);
        let mut any = false;
        let dependents: Vec<usize> = self.setup.topology.dependents().collect();
        for d in dependents {
            let Some(base) = self.dependents[d].base else {
                continue;
            };
            let estimate = base + self.model(d, t);
            let residual = self.target(d, t) - estimate;
            let st = &mut self.dependents[d];
            st.samples += 1;
            st.sum_sq += residual * residual;
            st.max_abs = st.max_abs.max(residual.abs());
            let dt = t - st.last_sync;
            if dt > 0.0 {
                st.sxy += (residual - st.residual_at_sync) * dt;
                st.sxx += dt * dt;
            }
            lo = lo.min(residual);
            hi = hi.max(residual);
            any = true;
            let lam = self.lamport[d].counter;
            self.log(
                TraceEvent::new(t, d, EventKind::Sample)
                    .estimate(estimate, Some(residual))
                    .lamport(lam),
            );
        }
        if any {
            let spread = hi - lo;
            self.epochs_sampled += 1;
            if spread < self.setup.config.agreement_threshold {
                self.epochs_agreeing += 1;
            }
            self.max_spread = self.max_spread.max(spread);
        }
        let next = (k + 1) as f64 * self.setup.config.sample_step;
        if next <= end {
            self.push(next, Event::Sample(k + 1));
        }
    }

    fn finish(self) -> BroadcastRun {
        let topo = &self.setup.topology;
        let mut dependents = Vec::new();
        let (mut sum_sq, mut samples, mut syncs, mut divergence) = (0.0, 0, 0, 0.0f64);
        for d in topo.dependents() {
            let st = &self.dependents[d];
            let rate = if st.sxx > 0.0 {
                st.sxy / st.sxx * SECONDS_PER_DAY
            } else {
                0.0
            };
            sum_sq += st.sum_sq;
            samples += st.samples;
            syncs += st.syncs;
            divergence = divergence.max(rate.abs());
            dependents.push(DependentSummary {
                node: d,
                syncs: st.syncs,
                samples: st.samples,
                rms_sync_error: if st.samples > 0 {
                    (st.sum_sq / st.samples as f64).sqrt()
                } else {
                    0.0
                },
                max_abs_residual: st.max_abs,
                divergence_rate: rate,
            });
        }
        let authorities = topo
            .authorities()
            .map(|a| AuthorityState {
                node: a,
                lamport: self.lamport[a].counter,
                emitted: self.emitted[a],
                replies: self.replies[a],
            })
            .collect();
        BroadcastRun {
            stats: SyncStats {
                rms_sync_error: if samples > 0 {
                    (sum_sq / samples as f64).sqrt()
                } else {
                    0.0
                },
                max_pair_disagreement: self.max_spread,
                agreement_fraction: if self.epochs_sampled > 0 {
                    self.epochs_agreeing as f64 / self.epochs_sampled as f64
                } else {
                    0.0
                },
                divergence_rate: divergence,
                samples,
                syncs,
            },
            dependents,
            authorities,
            trace: self.trace.unwrap_or_default(),
        }
    }
}
