mod common;

use cislunar_core::broadcastnet::{Link, Node, Role, Topology};
use cislunar_core::clockmodels::ClockModel;
use cislunar_core::relkinematics::EphemerisConfig;
use cislunar_core::transactnet::{
    attempt_comparison, cycle_residual, parse_snapshot, query_offset, run_transactions, write_snapshot, Edge, Ledgers,
    OffsetGraph, TransactConfig, TransactionState,
};
use cislunar_core::truth::TruthTable;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{clock, moon};

fn triangle_graph(offsets: [f64; 3], epochs: [f64; 3]) -> OffsetGraph {
    let mut g = OffsetGraph::new();
    for id in ["a", "b", "c"] {
        g.add_node(id).unwrap();
    }
    for ((a, b), (offset, epoch)) in [("a", "b"), ("b", "c"), ("c", "a")]
        .into_iter()
        .zip(offsets.into_iter().zip(epochs))
    {
        g.add_edge(Edge {
            a: a.into(),
            b: b.into(),
            offset,
            uncertainty: 1e-9,
            epoch,
        })
        .unwrap();
    }
    g
}

/// Run `attempts` slots over random node pairs with a random loss schedule,
/// checking every ledger after every slot. Returns (attempts, commits).
fn hammer(seed: u64, nodes: usize, attempts: usize) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ledgers = Ledgers::new(nodes);
    let mut commits = 0;
    for k in 0..attempts {
        let a = rng.random_range(0..nodes);
        let b = (a + rng.random_range(1..nodes)) % nodes;
        let mut link = Link::new(format!("n{a}"), format!("n{b}"), 0.01);
        link.loss_probability = rng.random_range(0.0..0.99);
        if rng.random_bool(0.2) {
            link.disruption_windows = vec![(k as f64 - 1.0, k as f64 + 1.0)];
        }
        let before = ledgers.clone();
        let tx = attempt_comparison(&mut ledgers, a, b, &link, true, k as f64, 1e-6, 0.0, 1e-9, &mut rng);
        match tx.state {
            TransactionState::Committed => {
                commits += 1;
                assert_eq!(ledgers.ledger(a).last(), ledgers.ledger(b).last());
                assert_eq!(ledgers.ledger(a).last().unwrap().transaction, tx.id);
            }
            TransactionState::Aborted => {
                for node in 0..nodes {
                    assert_eq!(ledgers.ledger(node), before.ledger(node));
                }
            }
            TransactionState::Proposed => panic!("slot left a transaction in flight"),
        }
        assert!(ledgers.find_one_sided().is_empty(), "one-sided record after slot {k}");
    }
    (attempts, commits)
}

#[test]
fn a_hundred_thousand_slots_leave_no_one_sided_record() {
    let mut total = 0;
    for seed in 0..400 {
        total += hammer(seed, 5, 250).0;
    }
    assert!(total >= 100_000);
}

#[test]
fn commit_fraction_matches_slot_probability() {
    // p_slot = (1 − loss)² = 0.7.
    let loss = 1.0 - 0.7f64.sqrt();
    let mut link = Link::new("a", "b", 0.01);
    link.loss_probability = loss;
    let mut ledgers = Ledgers::new(2);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 10_000;
    let commits = (0..n)
        .filter(|&k| {
            attempt_comparison(&mut ledgers, 0, 1, &link, true, k as f64, 0.0, 0.0, 0.0, &mut rng).state
                == TransactionState::Committed
        })
        .count();
    assert!((commits as f64 / n as f64 - 0.7).abs() < 0.015);
    assert!(ledgers.find_one_sided().is_empty());
}

#[test]
fn triangle_residual_spread_is_root_three_sigma() {
    let sigma = 1e-9;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let truth = [4e-9, -9e-9, 5e-9];
    let trials = 10_000;
    let residuals: Vec<f64> = (0..trials)
        .map(|_| {
            let mut ledgers = Ledgers::new(3);
            let link = Link::new("x", "y", 0.0);
            let offsets: Vec<f64> = [(0, 1), (1, 2), (2, 0)]
                .iter()
                .zip(truth)
                .map(|(&(a, b), t)| {
                    attempt_comparison(&mut ledgers, a, b, &link, true, 0.0, t, 0.0, sigma, &mut rng)
                        .committed_offset
                        .unwrap()
                })
                .collect();
            let g = triangle_graph([offsets[0], offsets[1], offsets[2]], [0.0; 3]);
            cycle_residual(&g, &["a", "b", "c"]).unwrap()
        })
        .collect();
    let mean = residuals.iter().sum::<f64>() / trials as f64;
    let var = residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
    let expected = sigma * 3f64.sqrt();
    assert!((var.sqrt() - expected).abs() < 0.05 * expected, "{}", var.sqrt());
}

#[test]
fn staggered_edges_leave_a_drift_residual() {
    // Node b runs fast by y relative to a and c. Edges a-b and b-c are fresh,
    // c-a was measured Δ seconds earlier; only the drift is left over.
    let y = 2e-12;
    let delta = 3_600.0;
    let now = 10_000.0;
    let da = |_t: f64| 0.0;
    let db = |t: f64| y * t;
    let dc = |_t: f64| 0.0;
    let g = triangle_graph(
        [da(now) - db(now), db(now) - dc(now), dc(now - delta) - da(now - delta)],
        [now, now, now - delta],
    );
    let r = cycle_residual(&g, &["a", "b", "c"]).unwrap();
    assert!(r.abs() < 1e-24);

    let g = triangle_graph(
        [da(now - delta) - db(now - delta), db(now) - dc(now), dc(now) - da(now)],
        [now - delta, now, now],
    );
    let r = cycle_residual(&g, &["a", "b", "c"]).unwrap();
    assert!((r - y * delta).abs() < 1e-6 * y * delta, "{r}");
}

#[test]
fn network_run_builds_consistent_graph() {
    let cfg = EphemerisConfig::default();
    let clocks = vec![
        clock(
            "a",
            Role::Authority,
            moon(-89.5, 0.0, 0.0),
            common::noisy(1, 1e-13, 0.0),
        ),
        clock(
            "b",
            Role::Dependent,
            moon(-89.0, 90.0, 0.0),
            common::noisy(2, 1e-13, 3e-12),
        ),
        clock(
            "c",
            Role::Dependent,
            moon(-88.0, 200.0, 0.0),
            common::noisy(3, 1e-13, -2e-12),
        ),
        clock("d", Role::Dependent, moon(-80.0, 10.0, 0.0), ClockModel::ideal()),
    ];
    let nodes = clocks
        .iter()
        .map(|c| Node {
            id: c.id.clone(),
            role: c.role,
        })
        .collect();
    let mut ab = Link::new("a", "b", 0.01);
    ab.loss_probability = 0.3;
    let mut bc = Link::new("b", "c", 0.01);
    bc.disruption_windows = vec![(0.0, 1_800.0)];
    let links = vec![ab, bc, Link::new("c", "a", 0.01)];
    let topology = Topology::new(nodes, links).unwrap();
    let truth = TruthTable::build(&cfg, clocks, 7_200.0, 60.0, 60.0, 0.4).unwrap();
    let config = TransactConfig::default();
    let run = run_transactions(&truth, &topology, &config, 5, true).unwrap();
    assert_eq!(run.one_sided, 0);
    assert_eq!(run.graph.edges().len(), run.commits);
    assert!(run.commits < run.attempts);
    assert_eq!(run.cycle_residuals.len(), 1);
    assert!(run.cycle_residuals[0].1.abs() < 10e-9);
    // d has no links: the graph says so instead of guessing.
    let d = run.queries.iter().find(|q| q.b == 3).unwrap();
    assert_eq!(d.offset, None);
    for q in run.queries.iter().filter(|q| q.b != 3) {
        assert!(q.error.unwrap().abs() < 10e-9);
    }

    let again = run_transactions(&truth, &topology, &config, 5, true).unwrap();
    assert_eq!(write_snapshot(&run.graph), write_snapshot(&again.graph));
    let parsed = parse_snapshot(&write_snapshot(&run.graph)).unwrap();
    assert_eq!(parsed.edges(), run.graph.edges());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn atomic_under_random_loss_schedules(seed in any::<u64>(), nodes in 2usize..8) {
        let (_, commits) = hammer(seed, nodes, 200);
        prop_assert!(commits <= 200);
    }

    #[test]
    fn both_ledgers_answer_the_same(offsets in proptest::collection::vec(-1e-6f64..1e-6, 1..20)) {
        let mut ledgers = Ledgers::new(2);
        let link = Link::new("a", "b", 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for (k, &o) in offsets.iter().enumerate() {
            attempt_comparison(&mut ledgers, 0, 1, &link, true, k as f64, o, 0.0, 0.0, &mut rng);
        }
        let mut views = Vec::new();
        for node in 0..2 {
            let mut g = OffsetGraph::new();
            g.add_node("a").unwrap();
            g.add_node("b").unwrap();
            for r in ledgers.ledger(node) {
                g.add_edge(Edge { a: "a".into(), b: "b".into(), offset: r.offset, uncertainty: 1e-9, epoch: r.epoch }).unwrap();
            }
            // Staleness makes the freshest comparison the cheapest path.
            views.push(query_offset(&g, "a", "b", offsets.len() as f64, 1e-3));
        }
        prop_assert_eq!(views[0], views[1]);
        prop_assert_eq!(views[0].unwrap().0, *offsets.last().unwrap());
    }
}
