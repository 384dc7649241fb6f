//! The `summary.json` schema written by `run` and read back by `report`.

use std::fmt::Write as _;

use cislunar_core::broadcastnet::Role;
use serde::{Deserialize, Serialize};

use crate::scenario::Architecture;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Summary {
    pub scenario: String,
    pub seed: u64,
    pub architecture: Architecture,
    pub duration: f64,
    pub epochs: usize,
    pub clocks: Vec<ClockRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub broadcast: Option<BroadcastSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transact: Option<TransactSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<HorizonSummary>,
    pub checks: Vec<Check>,
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClockRow {
    pub id: String,
    pub role: Role,
    /// Mean proper-time rate against coordinate time, µs/day.
    pub proper_rate_us_per_day: f64,
    /// Ensemble weight; absent for dependents.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BroadcastSummary {
    pub rms_sync_error: f64,
    pub max_pair_disagreement: f64,
    pub agreement_fraction: f64,
    /// Seconds per day.
    pub divergence_rate: f64,
    pub samples: usize,
    pub syncs: usize,
    pub dependents: Vec<DependentRow>,
    pub authorities: Vec<AuthorityRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DependentRow {
    pub id: String,
    pub syncs: usize,
    pub samples: usize,
    pub rms_sync_error: f64,
    pub max_abs_residual: f64,
    pub divergence_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuthorityRow {
    pub id: String,
    pub lamport: u64,
    pub emitted: u64,
    pub replies: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransactSummary {
    pub attempts: usize,
    pub commits: usize,
    pub one_sided: usize,
    pub edges: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_cycle_residual: Option<f64>,
    pub queries: Vec<QueryRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryRow {
    pub a: String,
    pub b: String,
    /// Absent when the graph holds no path between the two clocks.
    #[serde(default)]
    pub offset: Option<f64>,
    #[serde(default)]
    pub uncertainty: Option<f64>,
    pub truth: f64,
    #[serde(default)]
    pub error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonSummary {
    pub a: String,
    pub b: String,
    pub fit_window_days: f64,
    pub predict_window_days: f64,
    pub anomaly_scale: f64,
    pub threshold: f64,
    #[serde(default)]
    pub crossing_days: Option<f64>,
    pub max_error: f64,
    pub control_max_error: f64,
    pub fit_residual_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// |value − expected| ≤ tolerance.
    Within,
    /// value < expected.
    Below,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Check {
    pub name: String,
    #[serde(default)]
    pub value: Option<f64>,
    pub expected: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub pass: bool,
}

impl Check {
    pub fn within(name: impl Into<String>, value: f64, expected: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value: Some(value),
            expected,
            tolerance,
            comparison: Comparison::Within,
            pass: (value - expected).abs() <= tolerance,
        }
    }

    pub fn below(name: impl Into<String>, value: Option<f64>, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            expected: limit,
            tolerance: 0.0,
            comparison: Comparison::Below,
            pass: value.is_some_and(|v| v < limit),
        }
    }
}

pub fn parse_summary(text: &str) -> Result<Summary, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Usage(format!("summary.json: {e}")))
}

impl Summary {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Human-readable digest.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "scenario {} (seed {}, {:?})",
            self.scenario, self.seed, self.architecture
        );
        let _ = writeln!(s, "  {} epochs over {:.1} days", self.epochs, self.duration / 86_400.0);
        for c in &self.clocks {
            let weight = c.weight.map(|w| format!("  weight {w:.3}")).unwrap_or_default();
            let _ = writeln!(
                s,
                "  clock {:<16} {:<9} {:+.4} µs/day{weight}",
                c.id,
                format!("{:?}", c.role).to_lowercase(),
                c.proper_rate_us_per_day
            );
        }
        if let Some(b) = &self.broadcast {
            let _ = writeln!(
                s,
                "broadcast: rms {:.3e} s, worst pair {:.3e} s, agreement {:.3}, divergence {:.4} µs/day, {} syncs",
                b.rms_sync_error,
                b.max_pair_disagreement,
                b.agreement_fraction,
                b.divergence_rate * 1e6,
                b.syncs
            );
        }
        if let Some(t) = &self.transact {
            let _ = writeln!(
                s,
                "transact: {}/{} slots committed, {} one-sided, {} edges",
                t.commits, t.attempts, t.one_sided, t.edges
            );
            for q in &t.queries {
                match (q.offset, q.uncertainty) {
                    (Some(o), Some(u)) => {
                        let _ = writeln!(s, "  {} - {}: {o:+.6e} ± {u:.3e} s", q.a, q.b);
                    }
                    _ => {
                        let _ = writeln!(s, "  {} - {}: no relation", q.a, q.b);
                    }
                }
            }
        }
        if let Some(h) = &self.horizon {
            let crossing = h
                .crossing_days
                .map(|d| format!("after {d:.0} days ({:.2} years)", d / 365.25))
                .unwrap_or_else(|| "never".into());
            let _ = writeln!(
                s,
                "horizon {} - {}: error crosses {:.2e} s {crossing}; control max {:.2e} s",
                h.a, h.b, h.threshold, h.control_max_error
            );
        }
        for c in &self.checks {
            let verdict = if c.pass { "PASS" } else { "FAIL" };
            let value = c.value.map(|v| format!("{v:.6}")).unwrap_or_else(|| "none".into());
            let bound = match c.comparison {
                Comparison::Within => format!("{} ± {}", c.expected, c.tolerance),
                Comparison::Below => format!("< {}", c.expected),
            };
            let _ = writeln!(s, "{verdict} {}: {value} (expected {bound})", c.name);
        }
        s
    }
}
