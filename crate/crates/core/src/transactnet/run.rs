use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{attempt_comparison, cycle_residual, query_offset, Edge, Ledgers, OffsetGraph, TransactionState};
use crate::broadcastnet::Topology;
use crate::error::{Error, Result};
use crate::trace::{EventKind, TraceEvent};
use crate::truth::TruthTable;

/// Keeps the transactional draws independent of a broadcast run that shares
/// the scenario seed.
const STREAM: u64 = 0x7472_616e_7361_6374;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransactConfig {
    /// Seconds between rendezvous slots on each link.
    pub cadence: f64,
    /// One-sigma noise of a single comparison, seconds.
    pub measurement_noise: f64,
    /// Fractional frequency uncertainty used to age edges.
    pub staleness_rate: f64,
}

impl Default for TransactConfig {
    fn default() -> Self {
        Self {
            cadence: 60.0,
            measurement_noise: 1e-9,
            staleness_rate: 1e-12,
        }
    }
}

impl TransactConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cadence.is_finite() && self.cadence > 0.0) {
            return Err(Error::config(format!(
                "transact.cadence must be > 0 (got {})",
                self.cadence
            )));
        }
        for (key, v) in [
            ("measurement_noise", self.measurement_noise),
            ("staleness_rate", self.staleness_rate),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("transact.{key} must be ≥ 0 (got {v})")));
            }
        }
        Ok(())
    }
}

/// Offset of `a` relative to `b` as the graph answers it at the end of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OffsetQuery {
    pub a: usize,
    pub b: usize,
    pub offset: Option<f64>,
    pub uncertainty: Option<f64>,
    pub truth: f64,
    pub error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransactRun {
    pub ledgers: Ledgers,
    pub graph: OffsetGraph,
    pub attempts: usize,
    pub commits: usize,
    /// Transactions found in one ledger only, over all event boundaries.
    pub one_sided: usize,
    pub queries: Vec<OffsetQuery>,
    pub cycle_residuals: Vec<([String; 3], f64)>,
    pub trace: Vec<TraceEvent>,
}

/// Offer a rendezvous slot on every link at every cadence tick.
pub fn run_transactions(
    truth: &TruthTable,
    topology: &Topology,
    config: &TransactConfig,
    seed: u64,
    record_trace: bool,
) -> Result<TransactRun> {
    config.validate()?;
    let n = topology.nodes().len();
    if n != truth.clocks().len() {
        return Err(Error::config("topology and clock list differ in length"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ STREAM);
    let mut ledgers = Ledgers::new(n);
    let mut graph = OffsetGraph::new();
    for node in topology.nodes() {
        graph.add_node(&node.id)?;
    }
    let mut trace = Vec::new();
    let (mut attempts, mut commits, mut one_sided) = (0, 0, 0);
    let end = truth.end();
    let mut k = 0u64;
    loop {
        let t = k as f64 * config.cadence;
        if t > end {
            break;
        }
        for (l, link) in topology.links().iter().enumerate() {
            let a = topology.index_of(&link.a).expect("validated link");
            let b = topology.index_of(&link.b).expect("validated link");
            let (oa, ob) = (truth.displayed_offset_at(a, t), truth.displayed_offset_at(b, t));
            let tx = attempt_comparison(
                &mut ledgers,
                a,
                b,
                topology.link(l),
                true,
                t,
                oa,
                ob,
                config.measurement_noise,
                &mut rng,
            );
            attempts += 1;
            let held = |node: usize| ledgers.ledger(node).last().is_some_and(|r| r.transaction == tx.id);
            let committed = tx.state == TransactionState::Committed;
            if held(a) != committed || held(b) != committed {
                one_sided += 1;
            }
            match tx.committed_offset {
                Some(offset) => {
                    commits += 1;
                    graph.add_edge(Edge {
                        a: link.a.clone(),
                        b: link.b.clone(),
                        offset,
                        uncertainty: tx.uncertainty,
                        epoch: t,
                    })?;
                    if record_trace {
                        let residual = offset - (oa - ob);
                        for node in [a, b] {
                            trace.push(TraceEvent::new(t, node, EventKind::Commit).estimate(offset, Some(residual)));
                        }
                    }
                }
                None if record_trace => {
                    for node in [a, b] {
                        trace.push(TraceEvent::new(t, node, EventKind::Abort));
                    }
                }
                None => {}
            }
        }
        k += 1;
    }
    one_sided += ledgers.find_one_sided().len();

    let reference = topology.authorities().next().unwrap_or(0);
    let queries = (0..n)
        .filter(|&i| i != reference)
        .map(|i| {
            let truth_offset = truth.displayed_offset_at(reference, end) - truth.displayed_offset_at(i, end);
            let answer = query_offset(
                &graph,
                topology.id(reference),
                topology.id(i),
                end,
                config.staleness_rate,
            );
            OffsetQuery {
                a: reference,
                b: i,
                offset: answer.map(|(o, _)| o),
                uncertainty: answer.map(|(_, u)| u),
                truth: truth_offset,
                error: answer.map(|(o, _)| o - truth_offset),
            }
        })
        .collect();
    let cycle_residuals = graph
        .triangles()
        .into_iter()
        .map(|tri| {
            let r = cycle_residual(&graph, &[&tri[0], &tri[1], &tri[2]])?;
            Ok((tri, r))
        })
        .collect::<Result<_>>()?;
    Ok(TransactRun {
        ledgers,
        graph,
        attempts,
        commits,
        one_sided,
        queries,
        cycle_residuals,
        trace,
    })
}
