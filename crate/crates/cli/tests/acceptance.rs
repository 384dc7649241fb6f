//! Acceptance criteria A1 to A10, one line per criterion.
//!
//! Run with `cargo test -p cislunar-cli --test acceptance`. The process
//! exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use cislunar_cli::commands;
use cislunar_cli::scenario::{bundled, BUNDLED};
use cislunar_cli::summary::Summary;
use cislunar_cli::{parse_scenario, Scenario};
use cislunar_core::broadcastnet::{run_ack_chain, KnowledgeLadder, Link};
use cislunar_core::clockmodels::{
    allan_deviation, log_log_slope, log_spaced_taus, sample_clock, uniform_proper_samples, ClockModel,
};
use cislunar_core::coordmodels::{CoordinateConvention, PeriodicTerm};
use cislunar_core::corrections::Family;
use cislunar_core::finetune::model_swap;
use cislunar_core::transactnet::{attempt_comparison, cycle_residual, Edge, Ledgers, OffsetGraph, TransactionState};
use cislunar_core::truth::TruthTable;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn scenario(name: &str) -> Scenario {
    parse_scenario(bundled(name).unwrap()).unwrap()
}

fn run_in_temp(s: &Scenario) -> Result<Summary, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    commands::run(s, dir.path()).map_err(|e| e.to_string())
}

fn rate_anchor(name: &str) -> Outcome {
    let start = Instant::now();
    let summary = run_in_temp(&scenario(name))?;
    let secs = start.elapsed().as_secs_f64();
    let check = summary
        .checks
        .iter()
        .find(|c| c.name.starts_with("rate"))
        .ok_or("scenario has no rate check")?;
    let msg = format!(
        "{:.3} µs/day (expected {} ± {}) in {secs:.2} s",
        check.value.unwrap_or(f64::NAN),
        check.expected,
        check.tolerance
    );
    if check.pass && secs < 10.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn a3_equivalence() -> Outcome {
    let s = scenario("lunar_net");
    let (a, b) = (s.convention("ModelA").unwrap(), s.convention("ModelB").unwrap());
    let gap = (a.periodic_terms[0].amplitude - b.periodic_terms[0].amplitude).abs();
    let omega = a.periodic_terms[0].angular_frequency;
    // One synodic month at a coarse grid: the claim concerns every event.
    let mut month = s.clone();
    month.duration = 2.0 * std::f64::consts::PI / omega;
    month.epoch_step = 600.0;
    month.integration_step = Some(600.0);
    let prepared = month.prepare().map_err(|e| e.to_string())?;
    let truth = TruthTable::build(
        &month.ephemeris,
        prepared.clocks,
        month.duration,
        month.epoch_step,
        600.0,
        month.weight_cap,
    )
    .map_err(|e| e.to_string())?;
    let swap = model_swap(&truth, a, b).map_err(|e| e.to_string())?;
    if swap.pairwise_delta != 0.0 || (swap.label_delta - gap).abs() > 1e-6 * gap {
        return Err(format!(
            "ModelA/ModelB pairwise {:e}, label {:e} vs gap {gap:e}",
            swap.pairwise_delta, swap.label_delta
        ));
    }

    let mut runner = TestRunner::new(Config {
        cases: 100,
        failure_persistence: None,
        ..Config::default()
    });
    let strategy = (
        0.0f64..1e-6,
        0.0f64..1e-6,
        -1e-10f64..1e-10,
        0.0f64..std::f64::consts::TAU,
    );
    let result = runner.run(&strategy, |(amp_a, amp_b, secular, phase)| {
        let term = |amplitude| PeriodicTerm {
            amplitude,
            angular_frequency: omega,
            phase,
        };
        let a = CoordinateConvention::new("a", secular, vec![term(amp_a)]).unwrap();
        let b = CoordinateConvention::new("b", secular, vec![term(amp_b)]).unwrap();
        let swap = model_swap(&truth, &a, &b).unwrap();
        let gap = (amp_a - amp_b).abs();
        prop_assert_eq!(swap.pairwise_delta, 0.0);
        prop_assert!(
            (swap.label_delta - gap).abs() <= 1e-6 * gap + 1e-18,
            "{} vs {}",
            swap.label_delta,
            gap
        );
        Ok(())
    });
    match result {
        Ok(()) => Ok(format!(
            "pairwise delta 0, label delta {:.3e} s = gap over one synodic month; 100 random pairs hold",
            swap.label_delta
        )),
        Err(e) => Err(format!("random pair: {e}")),
    }
}

fn a4_fine_tuning() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (summary, _) = commands::sweep(&scenario("finetune"), dir.path(), Some(10_000)).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let fraction = summary.passing as f64 / summary.samples as f64;
    let near = summary.farthest_passing.is_none_or(|d| d <= summary.neighbourhood);
    let secular = summary.ablation(Family::Secular).unwrap().divergence_rate * 1e6;
    let drift = summary.ablation(Family::Drift).unwrap().divergence_rate * 1e6;
    let msg = format!(
        "{} of {} vectors within 10 ns ({:.2}%), farthest {}; secular off {secular:.3} µs/day, drift off {drift:.4} µs/day; {secs:.0} s",
        summary.passing,
        summary.samples,
        100.0 * fraction,
        summary.farthest_passing.map(|d| format!("{d:.3}")).unwrap_or_else(|| "n/a".into()),
    );
    let pass = summary.samples >= 10_000
        && fraction < 0.01
        && near
        && (secular - 56.02).abs() <= 0.5
        && (drift - 0.864).abs() <= 0.01 * 0.864
        && secs < 600.0;
    if pass {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn a5_atomicity() -> Outcome {
    let mut runner = TestRunner::new(Config {
        cases: 500,
        failure_persistence: None,
        ..Config::default()
    });
    let attempts = std::cell::Cell::new(0usize);
    let result = runner.run(&(any::<u64>(), 2usize..8), |(seed, nodes)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ledgers = Ledgers::new(nodes);
        for k in 0..200 {
            let a = rng.random_range(0..nodes);
            let b = (a + rng.random_range(1..nodes)) % nodes;
            let mut link = Link::new(format!("n{a}"), format!("n{b}"), 0.01);
            link.loss_probability = rng.random_range(0.0..0.99);
            if rng.random_bool(0.2) {
                link.disruption_windows = vec![(k as f64 - 1.0, k as f64 + 1.0)];
            }
            let before: Vec<_> = (0..nodes).map(|n| ledgers.ledger(n).to_vec()).collect();
            let tx = attempt_comparison(&mut ledgers, a, b, &link, true, k as f64, 1e-6, 0.0, 1e-9, &mut rng);
            attempts.set(attempts.get() + 1);
            match tx.state {
                TransactionState::Committed => {
                    prop_assert_eq!(ledgers.ledger(a).last(), ledgers.ledger(b).last());
                }
                TransactionState::Aborted => {
                    for (n, old) in before.iter().enumerate() {
                        prop_assert_eq!(ledgers.ledger(n), &old[..]);
                    }
                }
                TransactionState::Proposed => prop_assert!(false, "transaction left in flight"),
            }
            prop_assert!(ledgers.find_one_sided().is_empty());
        }
        Ok(())
    });
    let n = attempts.get();
    match result {
        Ok(()) if n >= 100_000 => Ok(format!("{n} attempts, 0 one-sided records")),
        Ok(()) => Err(format!("only {n} attempts")),
        Err(e) => Err(e.to_string()),
    }
}

fn a6_knowledge_ladder() -> Outcome {
    let p = 0.5;
    let n = 20_000;
    let rounds = 5;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let depths: Vec<u32> = (0..n).map(|_| run_ack_chain(rounds, p, &mut rng).unwrap()).collect();
    let mut worst_sigma = 0.0f64;
    for k in 1..=rounds {
        let expected = (1.0 - p).powi(k as i32);
        let observed = depths.iter().filter(|&&d| d >= k).count() as f64 / n as f64;
        let sigma = (expected * (1.0 - expected) / n as f64).sqrt();
        worst_sigma = worst_sigma.max((observed - expected).abs() / sigma);
    }
    // Even a lossless chain only ever reaches its finite round count.
    let mut ladder = KnowledgeLadder::new();
    let mut bounded = depths.iter().all(|&d| d <= rounds);
    for r in [1, 10, 1_000] {
        bounded &= ladder.run_ack_chain("a", "b", r, 0.0, &mut rng).unwrap() == r;
    }
    let msg = format!("worst |observed − (1−p)^k| = {worst_sigma:.2}σ over k = 1..5; depth never exceeds rounds");
    if worst_sigma <= 3.0 && bounded {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn a7_adev_slopes() -> Outcome {
    let taus = log_spaced_taus(1.0, 100.0, 9, 1.0);
    let slope = |model: ClockModel| {
        let readings = sample_clock(&model, &uniform_proper_samples(100_000, 1.0)).unwrap();
        log_log_slope(&allan_deviation(&readings, &taus).unwrap().points).unwrap()
    };
    let white = slope(ClockModel {
        white_fm_sigma: 1e-12,
        seed: 71,
        ..ClockModel::default()
    });
    let walk = slope(ClockModel {
        rw_fm_sigma: 1e-13,
        seed: 72,
        ..ClockModel::default()
    });
    let msg = format!("white FM {white:+.3}, random-walk FM {walk:+.3} over τ = 1..100 s");
    if (white + 0.5).abs() <= 0.1 && (walk - 0.5).abs() <= 0.1 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn a8_cycle_residuals() -> Outcome {
    let sigma = 1e-9;
    let trials = 10_000;
    let truth = [4e-9, -9e-9, 5e-9];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let link = Link::new("x", "y", 0.0);
    let mut residuals = Vec::with_capacity(trials);
    for _ in 0..trials {
        let mut ledgers = Ledgers::new(3);
        let mut g = OffsetGraph::new();
        for id in ["a", "b", "c"] {
            g.add_node(id).unwrap();
        }
        for ((a, b), t) in [(0, 1), (1, 2), (2, 0)].into_iter().zip(truth) {
            let tx = attempt_comparison(&mut ledgers, a, b, &link, true, 0.0, t, 0.0, sigma, &mut rng);
            g.add_edge(Edge {
                a: ["a", "b", "c"][a].into(),
                b: ["a", "b", "c"][b].into(),
                offset: tx.committed_offset.unwrap(),
                uncertainty: sigma,
                epoch: 0.0,
            })
            .unwrap();
        }
        residuals.push(cycle_residual(&g, &["a", "b", "c"]).unwrap());
    }
    let mean = residuals.iter().sum::<f64>() / trials as f64;
    let std = (residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (trials - 1) as f64).sqrt();
    let expected = sigma * 3f64.sqrt();
    let msg = format!(
        "std {:.4} ns vs σ√3 = {:.4} ns over {trials} trials",
        std * 1e9,
        expected * 1e9
    );
    if (std - expected).abs() <= 0.05 * expected {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn a9_horizon() -> Outcome {
    let summary = run_in_temp(&scenario("horizon"))?;
    let h = summary
        .horizon
        .as_ref()
        .ok_or("horizon scenario produced no horizon summary")?;
    let msg = format!(
        "error passes {:.2e} s after {} with a {:.0}% anomaly; in-family control max {:.2e} s",
        h.threshold,
        h.crossing_days
            .map(|d| format!("{d:.0} days ({:.3} years)", d / 365.25))
            .unwrap_or_else(|| "never".into()),
        (h.anomaly_scale - 1.0) * 100.0,
        h.control_max_error
    );
    let pass = h.crossing_days.is_some_and(|d| d < 25.0 * 365.25) && h.control_max_error < 1e-12;
    if pass {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn csv_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "csv") {
            files.insert(
                path.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&path).unwrap(),
            );
        }
    }
    files
}

fn a10_determinism() -> Outcome {
    let mut compared = 0;
    for (name, text) in BUNDLED {
        let s = parse_scenario(text).map_err(|e| e.to_string())?;
        let (x, y) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        commands::run(&s, x.path()).map_err(|e| e.to_string())?;
        commands::run(&s, y.path()).map_err(|e| e.to_string())?;
        let (fx, fy) = (csv_bytes(x.path()), csv_bytes(y.path()));
        if fx.is_empty() || fx != fy {
            return Err(format!("{name}: CSV artifacts differ between runs"));
        }
        compared += fx.len();
    }
    Ok(format!(
        "{} scenarios, {compared} CSV files byte-identical across two runs",
        BUNDLED.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("A1", "lunar rate anchor", || rate_anchor("anchor56")),
        ("A2", "GPS cross-check", || rate_anchor("gps38")),
        ("A3", "convention equivalence", a3_equivalence),
        ("A4", "fine-tuning signature", a4_fine_tuning),
        ("A5", "transaction atomicity", a5_atomicity),
        ("A6", "common-knowledge ladder", a6_knowledge_ladder),
        ("A7", "clock statistics", a7_adev_slopes),
        ("A8", "cycle residuals", a8_cycle_residuals),
        ("A9", "long-horizon fragility", a9_horizon),
        ("A10", "determinism", a10_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| a.starts_with('A')).collect();
    let mut failed = 0;
    for (id, title, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == id) {
            continue;
        }
        match check() {
            Ok(msg) => println!("{id:<3} PASS {title}: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("{id:<3} FAIL {title}: {msg}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
