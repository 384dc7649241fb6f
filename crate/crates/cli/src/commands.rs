//! One function per subcommand. Each takes a validated scenario and an
//! output directory and returns what it wrote.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use cislunar_core::broadcastnet::{BroadcastSetup, Topology};
use cislunar_core::clockmodels::{allan_deviation, log_spaced_taus, ClockReading};
use cislunar_core::coordmodels::{default_conventions, CoordinateConvention};
use cislunar_core::corrections::{CorrectionVector, Family};
use cislunar_core::finetune::{
    crossing_epoch, faithfulness_score, latin_hypercube, long_horizon_prediction, model_swap, offset_series,
    sweep_corrections, HarmonicModel, SweepResult,
};
use cislunar_core::relkinematics::SECONDS_PER_DAY;
use cislunar_core::trace::TraceEvent;
use cislunar_core::transactnet::{run_transactions, write_snapshot};
use cislunar_core::truth::TruthTable;
use serde::{Deserialize, Serialize};

use crate::output::{num, opt, ArtifactDir};
use crate::scenario::{bundled, HorizonSection, Prepared, Scenario};
use crate::summary::{
    AuthorityRow, BroadcastSummary, Check, ClockRow, DependentRow, HorizonSummary, QueryRow, Summary, TransactSummary,
};
use crate::{parse_scenario, CliError};

pub const EVENTS_HEADER: [&str; 6] = ["epoch", "node", "event", "offset_estimate", "residual_error", "lamport"];
pub const SWEEP_HEADER: [&str; 9] = [
    "secular_scale",
    "periodic_scale",
    "anomaly_scale",
    "drift_scale",
    "delay_scale",
    "rms_sync_error",
    "divergence_rate",
    "agreement_fraction",
    "max_pair_disagreement",
];
pub const SWAP_HEADER: [&str; 5] = [
    "epoch",
    "label_offset_a",
    "label_offset_b",
    "label_delta",
    "pairwise_delta",
];

/// Read a scenario from a file, or from the bundled set when no file of
/// that name exists.
pub fn load_scenario(spec: &str) -> Result<Scenario, CliError> {
    let path = Path::new(spec);
    let text = if path.exists() {
        fs::read_to_string(path).map_err(|e| CliError::io(path, e))?
    } else if let Some(text) = bundled(spec) {
        text.to_owned()
    } else {
        return Err(CliError::Usage(format!(
            "no scenario file or bundled scenario named `{spec}`"
        )));
    };
    Ok(parse_scenario(&text)?)
}

fn build_truth(scenario: &Scenario, prepared: &Prepared) -> Result<TruthTable, CliError> {
    Ok(TruthTable::build(
        &scenario.ephemeris,
        prepared.clocks.clone(),
        scenario.duration,
        scenario.epoch_step,
        prepared.integration_step,
        scenario.weight_cap,
    )?)
}

fn event_row(topology: &Topology, e: &TraceEvent) -> Vec<String> {
    vec![
        num(e.epoch),
        topology.id(e.node).to_owned(),
        e.kind.as_str().to_owned(),
        opt(e.offset_estimate),
        opt(e.residual_error),
        e.lamport.map(|l| l.to_string()).unwrap_or_default(),
    ]
}

/// Simulate the scenario and write every artifact it calls for.
pub fn run(scenario: &Scenario, out: &Path) -> Result<Summary, CliError> {
    let prepared = scenario.prepare()?;
    let topology = &prepared.topology;
    let truth = Arc::new(build_truth(scenario, &prepared)?);
    let mut dir = ArtifactDir::create(out)?;
    let mut events: Vec<TraceEvent> = Vec::new();
    let mut checks = Vec::new();

    let broadcast = if scenario.architecture.broadcast() {
        let setup = BroadcastSetup::new(
            truth.clone(),
            topology.clone(),
            prepared.broadcast.clone(),
            scenario.seed,
        )?;
        let run = setup.run(&scenario.corrections, true)?;
        events.extend(run.trace);
        Some(BroadcastSummary {
            rms_sync_error: run.stats.rms_sync_error,
            max_pair_disagreement: run.stats.max_pair_disagreement,
            agreement_fraction: run.stats.agreement_fraction,
            divergence_rate: run.stats.divergence_rate,
            samples: run.stats.samples,
            syncs: run.stats.syncs,
            dependents: run
                .dependents
                .iter()
                .map(|d| DependentRow {
                    id: topology.id(d.node).to_owned(),
                    syncs: d.syncs,
                    samples: d.samples,
                    rms_sync_error: d.rms_sync_error,
                    max_abs_residual: d.max_abs_residual,
                    divergence_rate: d.divergence_rate,
                })
                .collect(),
            authorities: run
                .authorities
                .iter()
                .map(|a| AuthorityRow {
                    id: topology.id(a.node).to_owned(),
                    lamport: a.lamport,
                    emitted: a.emitted,
                    replies: a.replies,
                })
                .collect(),
        })
    } else {
        None
    };

    let transact = if scenario.architecture.transactional() {
        let run = run_transactions(&truth, topology, &prepared.transact, scenario.seed, true)?;
        events.extend(run.trace.iter().cloned());
        dir.text("offset_graph.txt", &write_snapshot(&run.graph))?;
        dir.csv(
            "cycle_residuals.csv",
            &["a", "b", "c", "residual"],
            run.cycle_residuals
                .iter()
                .map(|([a, b, c], r)| vec![a.clone(), b.clone(), c.clone(), num(*r)]),
        )?;
        let queries: Vec<QueryRow> = run
            .queries
            .iter()
            .map(|q| QueryRow {
                a: topology.id(q.a).to_owned(),
                b: topology.id(q.b).to_owned(),
                offset: q.offset,
                uncertainty: q.uncertainty,
                truth: q.truth,
                error: q.error,
            })
            .collect();
        dir.csv(
            "offset_queries.csv",
            &["a", "b", "offset", "uncertainty", "truth", "error"],
            queries.iter().map(|q| {
                vec![
                    q.a.clone(),
                    q.b.clone(),
                    opt(q.offset),
                    opt(q.uncertainty),
                    num(q.truth),
                    opt(q.error),
                ]
            }),
        )?;
        checks.push(Check::within("transact.one_sided", run.one_sided as f64, 0.0, 0.0));
        Some(TransactSummary {
            attempts: run.attempts,
            commits: run.commits,
            one_sided: run.one_sided,
            edges: run.graph.edges().len(),
            max_cycle_residual: run.cycle_residuals.iter().map(|(_, r)| r.abs()).reduce(f64::max),
            queries,
        })
    } else {
        None
    };

    // Broadcast events come first at equal epochs; the sort is stable.
    events.sort_by(|x, y| x.epoch.total_cmp(&y.epoch));
    dir.csv(
        "events.csv",
        &EVENTS_HEADER,
        events.iter().map(|e| event_row(topology, e)),
    )?;
    write_ensemble(&mut dir, &truth)?;
    write_adev(&mut dir, &truth)?;

    let end = truth.end();
    let rate = |i: usize| {
        let p = truth.proper_offsets(i);
        (p[p.len() - 1] - p[0]) / end * SECONDS_PER_DAY * 1e6
    };
    let clocks = truth
        .clocks()
        .iter()
        .enumerate()
        .map(|(i, c)| ClockRow {
            id: c.id.clone(),
            role: c.role,
            proper_rate_us_per_day: rate(i),
            weight: truth
                .authorities()
                .iter()
                .position(|&a| a == i)
                .map(|p| truth.weights()[p]),
        })
        .collect();
    for e in &scenario.expect {
        let (a, b) = (truth.index_of(&e.a).unwrap(), truth.index_of(&e.b).unwrap());
        checks.push(Check::within(
            format!("rate {} - {} (us/day)", e.a, e.b),
            rate(a) - rate(b),
            e.rate_us_per_day,
            e.tolerance,
        ));
    }

    let horizon = match &scenario.horizon {
        Some(h) => {
            let summary = run_horizon(scenario, h, &mut dir)?;
            checks.push(Check::below(
                "horizon crossing (days)",
                summary.crossing_days,
                h.deadline_years * 365.25,
            ));
            checks.push(Check::below(
                "horizon in-family control (s)",
                Some(summary.control_max_error),
                h.control_tolerance,
            ));
            Some(summary)
        }
        None => None,
    };

    let mut artifacts = dir.manifest().to_vec();
    artifacts.push("summary.json".into());
    let summary = Summary {
        scenario: scenario.display_name().to_owned(),
        seed: scenario.seed,
        architecture: scenario.architecture,
        duration: scenario.duration,
        epochs: truth.len(),
        clocks,
        broadcast,
        transact,
        horizon,
        checks,
        artifacts,
    };
    dir.json("summary.json", &summary)?;
    Ok(summary)
}

fn write_ensemble(dir: &mut ArtifactDir, truth: &TruthTable) -> Result<(), CliError> {
    let Some(ensemble) = truth.ensemble_offsets() else {
        return Ok(());
    };
    let members = truth.authorities();
    let ids: Vec<&str> = members.iter().map(|&i| truth.clocks()[i].id.as_str()).collect();
    let mut header = vec!["epoch".to_owned(), "paper_time".to_owned(), "paper_offset".to_owned()];
    header.extend(ids.iter().map(|id| format!("weight_{id}")));
    header.extend(ids.iter().map(|id| format!("offset_{id}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = (0..truth.len()).map(|k| {
        let t = truth.epoch(k);
        let mut row = vec![num(t), num(t + ensemble[k]), num(ensemble[k])];
        row.extend(truth.weights().iter().map(|&w| num(w)));
        row.extend(members.iter().map(|&i| num(truth.displayed_offset(i, k))));
        row
    });
    dir.csv("ensemble.csv", &header, rows)
}

fn write_adev(dir: &mut ArtifactDir, truth: &TruthTable) -> Result<(), CliError> {
    let n = truth.len();
    let mut rows = Vec::new();
    if n >= 5 {
        let step = truth.step();
        let taus = log_spaced_taus(step, step * ((n - 1) / 4) as f64, 12, step);
        for (i, c) in truth.clocks().iter().enumerate() {
            let readings: Vec<ClockReading> = (0..n).map(|k| truth.reading(i, k)).collect();
            let report = allan_deviation(&readings, &taus)?;
            for p in report.points {
                rows.push(vec![c.id.clone(), num(p.tau), num(p.sigma)]);
            }
        }
    }
    dir.csv("adev.csv", &["clock", "tau", "adev"], rows)
}

fn run_horizon(scenario: &Scenario, h: &HorizonSection, dir: &mut ArtifactDir) -> Result<HorizonSummary, CliError> {
    let eph = &scenario.ephemeris;
    let a = &scenario.clock(&h.a).expect("validated").worldline;
    let b = &scenario.clock(&h.b).expect("validated").worldline;
    let nominal = offset_series(a, b, h.predict_window, h.sample_step, h.integration_step, eph)?;
    let perturbed = offset_series(
        &a.with_anomaly_scaled(h.anomaly_scale),
        b,
        h.predict_window,
        h.sample_step,
        h.integration_step,
        eph,
    )?;
    let model = HarmonicModel::orbital(eph, h.harmonics);
    let report = long_horizon_prediction(h.fit_window, h.predict_window, &nominal, &perturbed, &model)?;
    // In-family control: data drawn from the fitted model itself.
    let synthetic: Vec<(f64, f64)> = nominal.iter().map(|&(t, _)| (t, report.fit.evaluate(t))).collect();
    let control = long_horizon_prediction(h.fit_window, h.predict_window, &synthetic, &synthetic, &model)?;
    dir.csv(
        "horizon.csv",
        &["epoch", "prediction_error", "control_error"],
        report
            .epochs
            .iter()
            .zip(&report.errors)
            .zip(&control.errors)
            .map(|((&t, &e), &c)| vec![num(t), num(e), num(c)]),
    )?;
    Ok(HorizonSummary {
        a: h.a.clone(),
        b: h.b.clone(),
        fit_window_days: h.fit_window,
        predict_window_days: h.predict_window,
        anomaly_scale: h.anomaly_scale,
        threshold: h.threshold,
        crossing_days: crossing_epoch(&report, h.threshold).map(|t| t / SECONDS_PER_DAY),
        max_error: report.max_error(),
        control_max_error: control.max_error(),
        fit_residual_max: report.fit.residual_max,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ablation {
    pub family: String,
    pub rms_sync_error: f64,
    pub max_pair_disagreement: f64,
    /// Seconds per day.
    pub divergence_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub scenario: String,
    pub seed: u64,
    pub samples: usize,
    pub lower: f64,
    pub upper: f64,
    pub epsilon: f64,
    pub neighbourhood: f64,
    pub faithfulness: f64,
    pub passing: usize,
    /// Largest max-norm distance from the tuned point among passing vectors.
    #[serde(default)]
    pub farthest_passing: Option<f64>,
    pub tuned: Ablation,
    /// One row per family with that family alone switched off.
    pub ablations: Vec<Ablation>,
}

impl SweepSummary {
    pub fn ablation(&self, family: Family) -> Option<&Ablation> {
        self.ablations.iter().find(|a| a.family == family.name())
    }
}

fn sweep_setup(scenario: &Scenario) -> Result<BroadcastSetup, CliError> {
    let prepared = scenario.prepare()?;
    if prepared.topology.dependents().next().is_none() {
        return Err(CliError::Usage("a sweep needs at least one dependent clock".into()));
    }
    let truth = Arc::new(build_truth(scenario, &prepared)?);
    Ok(BroadcastSetup::new(
        truth,
        prepared.topology,
        prepared.broadcast,
        scenario.seed,
    )?)
}

/// Latin-hypercube sweep of the correction scales plus single-family
/// ablations.
pub fn sweep(
    scenario: &Scenario,
    out: &Path,
    samples: Option<usize>,
) -> Result<(SweepSummary, Vec<SweepResult>), CliError> {
    let mut cfg = scenario.sweep.clone().unwrap_or_default();
    if let Some(n) = samples {
        if n == 0 {
            return Err(CliError::Usage("--samples must be ≥ 1".into()));
        }
        cfg.samples = n;
    }
    let setup = sweep_setup(scenario)?;
    let vectors = latin_hypercube(cfg.samples, cfg.lower, cfg.upper, scenario.seed)?;
    let results = sweep_corrections(&setup, &vectors)?;
    let mut dir = ArtifactDir::create(out)?;
    dir.csv(
        "sweep.csv",
        &SWEEP_HEADER,
        results.iter().map(|r| {
            let mut row: Vec<String> = r.vector.to_array().iter().map(|&x| num(x)).collect();
            row.extend([
                num(r.rms_sync_error),
                num(r.divergence_rate),
                num(r.agreement_fraction),
                num(r.max_pair_disagreement),
            ]);
            row
        }),
    )?;

    let ablate = |family: &str, v: CorrectionVector| -> Result<Ablation, CliError> {
        let stats = setup.run(&v, false)?.stats;
        Ok(Ablation {
            family: family.to_owned(),
            rms_sync_error: stats.rms_sync_error,
            max_pair_disagreement: stats.max_pair_disagreement,
            divergence_rate: stats.divergence_rate,
        })
    };
    let tuned = ablate("none", CorrectionVector::TUNED)?;
    let ablations = Family::ALL
        .iter()
        .map(|&f| ablate(f.name(), CorrectionVector::TUNED.with(f, 0.0)))
        .collect::<Result<_, _>>()?;
    let passing: Vec<&SweepResult> = results
        .iter()
        .filter(|r| r.max_pair_disagreement < cfg.epsilon)
        .collect();
    let summary = SweepSummary {
        scenario: scenario.display_name().to_owned(),
        seed: scenario.seed,
        samples: cfg.samples,
        lower: cfg.lower,
        upper: cfg.upper,
        epsilon: cfg.epsilon,
        neighbourhood: cfg.neighbourhood,
        faithfulness: faithfulness_score(&results, cfg.epsilon)?,
        passing: passing.len(),
        farthest_passing: passing
            .iter()
            .map(|r| r.vector.max_norm_distance(&CorrectionVector::TUNED))
            .reduce(f64::max),
        tuned,
        ablations,
    };
    dir.json("sweep_summary.json", &summary)?;
    Ok((summary, results))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapSummary {
    pub scenario: String,
    pub convention_a: String,
    pub convention_b: String,
    pub window_days: f64,
    pub pairwise_delta: f64,
    pub label_delta: f64,
}

fn pick_conventions(
    scenario: &Scenario,
    a: Option<&str>,
    b: Option<&str>,
) -> Result<(CoordinateConvention, CoordinateConvention), CliError> {
    let find = |name: &str| {
        scenario
            .convention(name)
            .cloned()
            .ok_or_else(|| CliError::Usage(format!("unknown convention `{name}`")))
    };
    match (a, b) {
        (Some(a), Some(b)) => Ok((find(a)?, find(b)?)),
        (None, None) if scenario.conventions.len() >= 2 => {
            Ok((scenario.conventions[0].clone(), scenario.conventions[1].clone()))
        }
        (None, None) if scenario.conventions.is_empty() => Ok(default_conventions()),
        _ => Err(CliError::Usage("name both conventions or neither".into())),
    }
}

/// Label the scenario's clock events under two conventions and compare.
pub fn compare_models(
    scenario: &Scenario,
    out: &Path,
    a: Option<&str>,
    b: Option<&str>,
    days: Option<f64>,
) -> Result<SwapSummary, CliError> {
    let (conv_a, conv_b) = pick_conventions(scenario, a, b)?;
    let mut windowed = scenario.clone();
    if let Some(d) = days {
        if !(d.is_finite() && d > 0.0) {
            return Err(CliError::Usage(format!("--days must be > 0 (got {d})")));
        }
        windowed.duration = d * SECONDS_PER_DAY;
        // Keep the grid near 10^4 points however long the window.
        windowed.epoch_step = scenario
            .epoch_step
            .max(windowed.duration / 10_000.0)
            .min(windowed.duration);
    }
    let prepared = windowed.prepare()?;
    let truth = build_truth(&windowed, &prepared)?;
    let swap = model_swap(&truth, &conv_a, &conv_b)?;
    let mut dir = ArtifactDir::create(out)?;
    dir.csv(
        "model_swap.csv",
        &SWAP_HEADER,
        swap.rows.iter().map(|r| {
            vec![
                num(r.epoch),
                num(r.label_offset_a),
                num(r.label_offset_b),
                num(r.label_delta),
                num(r.pairwise_delta),
            ]
        }),
    )?;
    let summary = SwapSummary {
        scenario: scenario.display_name().to_owned(),
        convention_a: conv_a.name,
        convention_b: conv_b.name,
        window_days: windowed.duration / SECONDS_PER_DAY,
        pairwise_delta: swap.pairwise_delta,
        label_delta: swap.label_delta,
    };
    dir.json("model_swap.json", &summary)?;
    Ok(summary)
}

/// Digest of a previous run's `summary.json`.
pub fn report(path: &Path) -> Result<String, CliError> {
    let file = if path.is_dir() {
        path.join("summary.json")
    } else {
        path.to_path_buf()
    };
    let text = fs::read_to_string(&file).map_err(|e| CliError::io(&file, e))?;
    Ok(crate::parse_summary(&text)?.render())
}
