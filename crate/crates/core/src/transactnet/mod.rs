//! Atomic bilateral clock comparisons and the relational offset graph they
//! build. There is no global time coordinate here, only pairwise edges.

mod graph;
mod run;

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::broadcastnet::Link;

pub use graph::{cycle_residual, parse_snapshot, query_offset, write_snapshot, Edge, OffsetGraph};
pub use run::{run_transactions, OffsetQuery, TransactConfig, TransactRun};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TransactionState {
    Proposed,
    Committed,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonTransaction {
    pub id: u64,
    pub participants: (usize, usize),
    pub state: TransactionState,
    /// `displayed_a − displayed_b`; present only when committed.
    pub committed_offset: Option<f64>,
    pub uncertainty: f64,
    pub rendezvous_epoch: f64,
}

/// The record both participants hold after a commit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerRecord {
    pub transaction: u64,
    pub a: usize,
    pub b: usize,
    pub offset: f64,
    pub uncertainty: f64,
    pub epoch: f64,
}

/// Per-node ledgers. The only way to add a record is [`Ledgers::commit`],
/// which writes the same record to both participants in one step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Ledgers {
    books: Vec<Vec<LedgerRecord>>,
    next_id: u64,
}

impl Ledgers {
    pub fn new(nodes: usize) -> Self {
        Self {
            books: vec![Vec::new(); nodes],
            next_id: 0,
        }
    }

    pub fn ledger(&self, node: usize) -> &[LedgerRecord] {
        &self.books[node]
    }

    pub fn nodes(&self) -> usize {
        self.books.len()
    }

    fn propose(&mut self) -> u64 {
        self.next_id += 1;
        self.next_id
    }

    fn commit(&mut self, record: LedgerRecord) {
        self.books[record.a].push(record.clone());
        self.books[record.b].push(record);
    }

    /// Transactions held by exactly one participant, or held differently.
    /// Checks every record of every ledger.
    pub fn find_one_sided(&self) -> Vec<u64> {
        let index: Vec<HashMap<u64, &LedgerRecord>> = self
            .books
            .iter()
            .map(|book| book.iter().map(|r| (r.transaction, r)).collect())
            .collect();
        let mut bad = Vec::new();
        for (node, book) in self.books.iter().enumerate() {
            for r in book {
                let partner = if r.a == node { r.b } else { r.a };
                let held = (r.a == node || r.b == node) && index[partner].get(&r.transaction) == Some(&r);
                if !held {
                    bad.push(r.transaction);
                }
            }
        }
        bad.sort_unstable();
        bad.dedup();
        bad
    }

    /// All committed records, each once, in commit order.
    pub fn records(&self) -> Vec<LedgerRecord> {
        let mut all: Vec<LedgerRecord> = self
            .books
            .iter()
            .enumerate()
            .flat_map(|(n, book)| book.iter().filter(move |r| r.a == n).cloned())
            .collect();
        all.sort_by_key(|r| r.transaction);
        all
    }
}

/// Probability that a rendezvous slot on `link` at `t` succeeds: both
/// directions must get through, and nothing does during a disruption.
pub fn slot_probability(link: &Link, t: f64) -> f64 {
    if link.is_disrupted(t) {
        0.0
    } else {
        (1.0 - link.loss_probability).powi(2)
    }
}

/// One rendezvous slot between `a` and `b` at coordinate time `t`.
///
/// `offset_a` and `offset_b` are the two clocks' displayed offsets at the
/// slot. On success both ledgers receive the same record carrying the
/// measured `displayed_a − displayed_b`: the true value plus half the link
/// asymmetry (light time is corrected as if symmetric) plus Gaussian
/// measurement noise. The asymmetry is folded into the stated uncertainty.
#[allow(clippy::too_many_arguments)]
pub fn attempt_comparison<R: Rng + ?Sized>(
    ledgers: &mut Ledgers,
    a: usize,
    b: usize,
    link: &Link,
    a_is_link_a: bool,
    t: f64,
    offset_a: f64,
    offset_b: f64,
    measurement_noise: f64,
    rng: &mut R,
) -> ComparisonTransaction {
    let id = ledgers.propose();
    let half_asym = 0.5 * if a_is_link_a { link.asymmetry } else { -link.asymmetry };
    let uncertainty = measurement_noise.hypot(half_asym);
    let mut tx = ComparisonTransaction {
        id,
        participants: (a, b),
        state: TransactionState::Proposed,
        committed_offset: None,
        uncertainty,
        rendezvous_epoch: t,
    };
    let p = slot_probability(link, t);
    let success = p >= 1.0 || (p > 0.0 && rng.random::<f64>() < p);
    if !success {
        tx.state = TransactionState::Aborted;
        return tx;
    }
    let noise = if measurement_noise > 0.0 {
        measurement_noise * Distribution::<f64>::sample(&StandardNormal, rng)
    } else {
        0.0
    };
    let offset = (offset_a - offset_b) + half_asym + noise;
    ledgers.commit(LedgerRecord {
        transaction: id,
        a,
        b,
        offset,
        uncertainty,
        epoch: t,
    });
    tx.state = TransactionState::Committed;
    tx.committed_offset = Some(offset);
    tx
}
