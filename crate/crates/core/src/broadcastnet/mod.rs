//! One-way broadcast and two-way time transfer over a lossy, intermittently
//! disrupted network, with Lamport stamps and an acknowledgement ladder.

mod sim;
mod topology;

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use sim::{AuthorityState, BroadcastConfig, BroadcastRun, BroadcastSetup, DependentSummary, SyncMode, SyncStats};
pub use topology::{Link, Node, Role, Topology, Window};

/// A displayed time split into coordinate epoch and `displayed − epoch`.
///
/// Differences between labels subtract the two parts separately, so that
/// nanosecond offsets are not lost against a large epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Label {
    pub coordinate: f64,
    pub offset: f64,
}

impl Label {
    pub fn new(coordinate: f64, offset: f64) -> Self {
        Self { coordinate, offset }
    }

    pub fn seconds(&self) -> f64 {
        self.coordinate + self.offset
    }

    /// `self − other` in seconds.
    pub fn since(&self, other: &Label) -> f64 {
        (self.coordinate - other.coordinate) + (self.offset - other.offset)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSignal {
    /// Node index of the emitting authority.
    pub origin: usize,
    pub emit_label: Label,
    pub lamport_stamp: u64,
    /// The origin's stamp, unchanged by relays; identifies the broadcast.
    pub origin_stamp: u64,
    /// Nodes the signal has left, origin first.
    pub path: Vec<usize>,
    /// Sum of configured base delays over the hops so far.
    pub modeled_delay: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Delivery {
    Delivered { at: f64 },
    Lost,
    Blocked,
}

/// Push a signal onto a link at coordinate time `t`.
///
/// A disrupted link blocks without consuming randomness. Loss is a single
/// Bernoulli draw, skipped when the loss probability is zero.
pub fn deliver<R: Rng + ?Sized>(link: &Link, from_a: bool, t: f64, rng: &mut R) -> Delivery {
    if link.is_disrupted(t) {
        return Delivery::Blocked;
    }
    if link.loss_probability > 0.0 && rng.random::<f64>() < link.loss_probability {
        return Delivery::Lost;
    }
    Delivery::Delivered {
        at: t + link.delay(from_a),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct LamportClock {
    pub counter: u64,
}

impl LamportClock {
    /// Advance for a local send and return the stamp to attach.
    pub fn send(&mut self) -> u64 {
        self.counter += 1;
        self.counter
    }

    pub fn receive(&mut self, stamp: u64) -> u64 {
        self.counter = self.counter.max(stamp) + 1;
        self.counter
    }
}

/// Estimated `source − local` offset from a single time signal.
pub fn one_way_sync(emit_label: Label, assumed_delay: f64, local: Label) -> f64 {
    emit_label.since(&local) + assumed_delay
}

/// The four timestamps of a two-way exchange: `a` sends at t1, `b`
/// receives at t2 and replies at t3, `a` receives at t4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoWayExchange {
    pub t1: Label,
    pub t2: Label,
    pub t3: Label,
    pub t4: Label,
}

impl TwoWayExchange {
    /// Estimated `b − a` offset.
    pub fn offset(&self) -> f64 {
        two_way_transfer(self.t1, self.t2, self.t3, self.t4)
    }
}

/// `((t2 − t1) + (t3 − t4)) / 2`, with the delay terms cancelled before
/// the offsets are added back.
pub fn two_way_transfer(t1: Label, t2: Label, t3: Label, t4: Label) -> f64 {
    let coordinate = (t2.coordinate - t1.coordinate) + (t3.coordinate - t4.coordinate);
    let offset = (t2.offset - t1.offset) + (t3.offset - t4.offset);
    0.5 * coordinate + 0.5 * offset
}

/// Run a two-way exchange started by `a` at `t` over `link`, where `a` sits
/// on the link's `a` side iff `a_is_link_a`. The clocks are given as
/// displayed-offset functions of coordinate time. Returns `None` when either
/// leg is lost or blocked.
pub fn exchange<R: Rng + ?Sized>(
    link: &Link,
    a_is_link_a: bool,
    t: f64,
    turnaround: f64,
    clock_a: impl Fn(f64) -> f64,
    clock_b: impl Fn(f64) -> f64,
    rng: &mut R,
) -> Option<TwoWayExchange> {
    let Delivery::Delivered { at: t2 } = deliver(link, a_is_link_a, t, rng) else {
        return None;
    };
    let t3 = t2 + turnaround;
    let Delivery::Delivered { at: t4 } = deliver(link, !a_is_link_a, t3, rng) else {
        return None;
    };
    Some(TwoWayExchange {
        t1: Label::new(t, clock_a(t)),
        t2: Label::new(t2, clock_b(t2)),
        t3: Label::new(t3, clock_b(t3)),
        t4: Label::new(t4, clock_a(t4)),
    })
}

/// How many consecutive acknowledgements got through in a chain of `rounds`
/// messages, each lost independently with probability `loss`.
///
/// The depth is a plain count. There is no value meaning "common
/// knowledge", and no finite number of rounds produces one.
pub fn run_ack_chain<R: Rng + ?Sized>(rounds: u32, loss: f64, rng: &mut R) -> Result<u32> {
    if rounds == 0 {
        return Err(Error::input("an ack chain needs at least one round"));
    }
    if !(0.0..1.0).contains(&loss) {
        return Err(Error::input(format!("loss probability {loss} outside [0, 1)")));
    }
    let mut depth = 0;
    while depth < rounds {
        if loss > 0.0 && rng.random::<f64>() < loss {
            break;
        }
        depth += 1;
    }
    Ok(depth)
}

/// "A knows that B knows that …" depth per ordered pair.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct KnowledgeLadder {
    depths: BTreeMap<(String, String), u32>,
}

impl KnowledgeLadder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn depth(&self, a: &str, b: &str) -> u32 {
        self.depths.get(&(a.to_owned(), b.to_owned())).copied().unwrap_or(0)
    }

    /// Run an ack chain between `a` and `b` and record the resulting depth.
    pub fn run_ack_chain<R: Rng + ?Sized>(
        &mut self,
        a: &str,
        b: &str,
        rounds: u32,
        loss: f64,
        rng: &mut R,
    ) -> Result<u32> {
        let depth = run_ack_chain(rounds, loss, rng)?;
        self.depths.insert((a.to_owned(), b.to_owned()), depth);
        Ok(depth)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(String, String), &u32)> {
        self.depths.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn clean_link_delivers_after_delay() {
        let link = Link::new("moon", "earth", 1.3);
        assert_eq!(
            deliver(&link, true, 100.0, &mut rng(0)),
            Delivery::Delivered { at: 101.3 }
        );
    }

    #[test]
    fn disrupted_link_blocks_without_randomness() {
        let mut link = Link::new("a", "b", 1.0);
        link.loss_probability = 0.5;
        link.disruption_windows = vec![(0.0, 50.0)];
        let mut r = rng(1);
        let before = r.clone();
        assert_eq!(deliver(&link, true, 10.0, &mut r), Delivery::Blocked);
        assert_eq!(r, before);
    }

    #[test]
    fn delivery_fraction_is_binomial() {
        let eps = 0.05;
        let mut link = Link::new("a", "b", 1.0);
        link.loss_probability = 1.0 - eps;
        let mut r = rng(7);
        let n = 10_000;
        let ok = (0..n)
            .filter(|_| matches!(deliver(&link, true, 0.0, &mut r), Delivery::Delivered { .. }))
            .count();
        let sigma = (eps * (1.0 - eps) / n as f64).sqrt();
        assert!((ok as f64 / n as f64 - eps).abs() < 3.0 * sigma, "{ok}");
    }

    #[test]
    fn lamport_receive_rule() {
        let mut c = LamportClock { counter: 4 };
        assert_eq!(c.receive(9), 10);
        assert_eq!(c.receive(2), 11);
        assert_eq!(c.send(), 12);
    }

    #[test]
    fn one_way_sync_residuals() {
        // Source and local both ideal; the true delay is 1.3 s.
        let emit = Label::new(1000.0, 0.0);
        let local = Label::new(1001.3, 0.0);
        assert!(one_way_sync(emit, 1.3, local).abs() < 1e-12);
        // Assuming 10 ms too much leaves the estimate 10 ms high, so
        // truth − estimate is −10 ms.
        let est = one_way_sync(emit, 1.31, local);
        assert!(((0.0 - est) + 0.01).abs() < 1e-12);
    }

    #[test]
    fn stale_divergence_from_frequency_offset() {
        // A clock 1e-11 fast drifts from its source for two days.
        let gap: f64 = 172_800.0;
        assert!((1e-11 * gap - 1.728e-6).abs() < 1e-18);
    }

    #[test]
    fn symmetric_exchange_recovers_offset() {
        let link = Link::new("a", "b", 1.3);
        let x = exchange(&link, true, 0.0, 0.0, |_| 0.0, |_| 42e-9, &mut rng(0)).unwrap();
        assert_eq!(x.offset(), 42e-9);
        // Later epochs only lose the rounding of the coordinate timestamps.
        let x = exchange(&link, true, 500.0, 0.1, |_| 0.0, |_| 42e-9, &mut rng(0)).unwrap();
        assert!((x.offset() - 42e-9).abs() < 4.0 * f64::EPSILON * 503.0);
    }

    #[test]
    fn asymmetric_exchange_biased_by_half() {
        let mut link = Link::new("a", "b", 1.3);
        link.asymmetry = 0.02;
        let x = exchange(&link, true, 0.0, 0.0, |_| 0.0, |_| 0.0, &mut rng(0)).unwrap();
        // Oracle: t2 − t1 = d + Δ/2, t3 − t4 = −(d − Δ/2).
        assert!((x.offset() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn lost_leg_gives_no_estimate() {
        let mut link = Link::new("a", "b", 1.0);
        link.disruption_windows = vec![(0.0, 1.0)];
        assert!(exchange(&link, true, 0.5, 0.0, |_| 0.0, |_| 0.0, &mut rng(0)).is_none());
        // Forward leg clears the window but the reply falls inside another.
        link.disruption_windows = vec![(1.5, 3.0)];
        assert!(exchange(&link, true, 0.0, 1.0, |_| 0.0, |_| 0.0, &mut rng(0)).is_none());
    }

    #[test]
    fn ack_chain_depths() {
        assert_eq!(run_ack_chain(5, 0.0, &mut rng(0)).unwrap(), 5);
        assert!(run_ack_chain(0, 0.0, &mut rng(0)).is_err());
        assert!(run_ack_chain(3, 1.0, &mut rng(0)).is_err());
        let mut r = rng(11);
        let n = 10_000;
        let hits = (0..n).filter(|_| run_ack_chain(3, 0.5, &mut r).unwrap() >= 3).count();
        assert!((hits as f64 / n as f64 - 0.125).abs() < 0.01);
    }

    #[test]
    fn ladder_records_per_ordered_pair() {
        let mut ladder = KnowledgeLadder::new();
        ladder.run_ack_chain("a", "b", 4, 0.0, &mut rng(0)).unwrap();
        assert_eq!(ladder.depth("a", "b"), 4);
        assert_eq!(ladder.depth("b", "a"), 0);
    }

    proptest! {
        #[test]
        fn two_way_bias_ignores_symmetric_delay(
            base in 0.0f64..5.0,
            asym in -0.1f64..0.1,
            offset in -1e-3f64..1e-3,
            start in 0.0f64..1e6,
        ) {
            prop_assume!(base - asym.abs() / 2.0 >= 0.0);
            let mut link = Link::new("a", "b", base);
            link.asymmetry = asym;
            let x = exchange(&link, true, start, 0.0, |_| 0.0, |_| offset, &mut rng(0)).unwrap();
            let bias = x.offset() - offset;
            // Coordinate epochs are rounded to the ulp of `start`.
            let tol = 4.0 * f64::EPSILON * (start + base + 1.0);
            prop_assert!((bias - asym / 2.0).abs() < tol, "bias {bias}, asym {asym}");
        }
    }
}
