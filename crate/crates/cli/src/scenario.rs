//! Scenario documents: TOML in, validated simulation inputs out.

use std::collections::HashSet;

use cislunar_core::broadcastnet::{BroadcastConfig, Link, Node, Role, SyncMode, Topology};
use cislunar_core::clockmodels::ClockModel;
use cislunar_core::coordmodels::CoordinateConvention;
use cislunar_core::corrections::{CorrectionVector, PeriodicSource};
use cislunar_core::ensemble::DEFAULT_WEIGHT_CAP;
use cislunar_core::relkinematics::{EphemerisConfig, Worldline};
use cislunar_core::transactnet::TransactConfig;
use cislunar_core::truth::ClockSpec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{key}: {message}")]
    Semantic { key: String, message: String },
}

fn sem(key: impl Into<String>, message: impl ToString) -> ScenarioError {
    ScenarioError::semantic(key, message)
}

impl ScenarioError {
    fn semantic(key: impl Into<String>, message: impl ToString) -> Self {
        ScenarioError::Semantic {
            key: key.into(),
            message: message.to_string(),
        }
    }

    pub fn line(&self) -> Option<usize> {
        match self {
            ScenarioError::Syntax { line, .. } => Some(*line),
            ScenarioError::Semantic { .. } => None,
        }
    }

    pub fn key(&self) -> Option<&str> {
        match self {
            ScenarioError::Semantic { key, .. } => Some(key),
            ScenarioError::Syntax { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    #[default]
    Broadcast,
    Transactional,
    Both,
}

impl Architecture {
    pub fn broadcast(self) -> bool {
        matches!(self, Architecture::Broadcast | Architecture::Both)
    }

    pub fn transactional(self) -> bool {
        matches!(self, Architecture::Transactional | Architecture::Both)
    }
}

/// Clock hardware as written in a scenario. Without an explicit seed the
/// noise seed is derived from the scenario seed and the clock's position.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelEntry {
    pub frequency_offset: f64,
    pub linear_drift: f64,
    pub white_fm_sigma: f64,
    pub rw_fm_sigma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClockEntry {
    pub id: String,
    pub role: Role,
    pub worldline: Worldline,
    #[serde(default)]
    pub model: ModelEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BroadcastSection {
    pub cadence: f64,
    pub sync_mode: SyncMode,
    pub resync_interval: f64,
    pub agreement_threshold: f64,
    pub relay: bool,
    pub turnaround: f64,
    /// `"fitted"` or the name of a declared convention.
    pub periodic_model: String,
}

impl Default for BroadcastSection {
    fn default() -> Self {
        let d = BroadcastConfig::default();
        Self {
            cadence: d.cadence,
            sync_mode: d.sync_mode,
            resync_interval: d.resync_interval,
            agreement_threshold: d.agreement_threshold,
            relay: d.relay,
            turnaround: d.turnaround,
            periodic_model: FITTED.into(),
        }
    }
}

const FITTED: &str = "fitted";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransactSection {
    pub cadence: f64,
    pub measurement_noise: f64,
    pub staleness_rate: f64,
}

impl Default for TransactSection {
    fn default() -> Self {
        let d = TransactConfig::default();
        Self {
            cadence: d.cadence,
            measurement_noise: d.measurement_noise,
            staleness_rate: d.staleness_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub samples: usize,
    pub lower: f64,
    pub upper: f64,
    /// Worst-pair agreement threshold, seconds.
    pub epsilon: f64,
    /// Passing vectors must lie this close (max-norm) to the tuned point.
    pub neighbourhood: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            samples: 10_000,
            lower: 0.0,
            upper: 2.0,
            epsilon: 10e-9,
            neighbourhood: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonSection {
    pub a: String,
    pub b: String,
    /// Days.
    #[serde(default = "default_fit_window")]
    pub fit_window: f64,
    /// Days.
    pub predict_window: f64,
    /// Multiplier on `a`'s mascon anomaly in the truth run only.
    #[serde(default = "default_anomaly_scale")]
    pub anomaly_scale: f64,
    #[serde(default = "default_harmonics")]
    pub harmonics: usize,
    #[serde(default = "default_horizon_sample")]
    pub sample_step: f64,
    #[serde(default = "default_horizon_integration")]
    pub integration_step: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Years within which the error must cross `threshold`.
    #[serde(default = "default_deadline")]
    pub deadline_years: f64,
    /// Largest error allowed for the in-family control.
    #[serde(default = "default_control")]
    pub control_tolerance: f64,
}

fn default_fit_window() -> f64 {
    30.0
}
fn default_anomaly_scale() -> f64 {
    1.01
}
fn default_harmonics() -> usize {
    6
}
fn default_horizon_sample() -> f64 {
    86_400.0
}
fn default_horizon_integration() -> f64 {
    3_600.0
}
fn default_threshold() -> f64 {
    0.15e-9
}
fn default_deadline() -> f64 {
    25.0
}
fn default_control() -> f64 {
    1e-12
}

/// Expected mean rate of clock `a` against clock `b` over the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateCheck {
    pub a: String,
    pub b: String,
    pub rate_us_per_day: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    pub seed: u64,
    /// Seconds.
    pub duration: f64,
    /// Truth grid and residual sampling step, seconds.
    #[serde(default = "default_epoch_step")]
    pub epoch_step: f64,
    /// Proper-time integration step; defaults to min(epoch_step, 60 s).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integration_step: Option<f64>,
    #[serde(default)]
    pub architecture: Architecture,
    #[serde(default = "default_cap")]
    pub weight_cap: f64,
    #[serde(default)]
    pub ephemeris: EphemerisConfig,
    #[serde(default)]
    pub corrections: CorrectionVector,
    #[serde(default)]
    pub broadcast: BroadcastSection,
    #[serde(default)]
    pub transact: TransactSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<HorizonSection>,
    pub clocks: Vec<ClockEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub conventions: Vec<CoordinateConvention>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub links: Vec<Link>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub expect: Vec<RateCheck>,
}

fn default_epoch_step() -> f64 {
    60.0
}
fn default_cap() -> f64 {
    DEFAULT_WEIGHT_CAP
}

/// Validated inputs for the simulation crates.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub clocks: Vec<ClockSpec>,
    pub topology: Topology,
    pub broadcast: BroadcastConfig,
    pub transact: TransactConfig,
    pub integration_step: f64,
}

/// Parse and fully validate a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let scenario: Scenario = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(1);
        ScenarioError::Syntax {
            line,
            message: e.message().to_owned(),
        }
    })?;
    scenario.prepare()?;
    Ok(scenario)
}

/// Serialize back to the document format.
pub fn render_scenario(scenario: &Scenario) -> Result<String, ScenarioError> {
    toml::to_string(scenario).map_err(|e| ScenarioError::semantic("scenario", e))
}

/// SplitMix64 finalizer, used to spread one scenario seed over many clocks.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Scenario {
    pub fn display_name(&self) -> &str {
        if self.name.is_empty() {
            "scenario"
        } else {
            &self.name
        }
    }

    pub fn convention(&self, name: &str) -> Option<&CoordinateConvention> {
        self.conventions.iter().find(|c| c.name == name)
    }

    pub fn clock(&self, id: &str) -> Option<&ClockEntry> {
        self.clocks.iter().find(|c| c.id == id)
    }

    /// Check every invariant and assemble the simulation inputs.
    pub fn prepare(&self) -> Result<Prepared, ScenarioError> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(sem("duration", format!("must be > 0 (got {})", self.duration)));
        }
        if !(self.epoch_step.is_finite() && self.epoch_step > 0.0 && self.epoch_step <= self.duration) {
            return Err(sem(
                "epoch_step",
                format!("must lie in (0, duration] (got {})", self.epoch_step),
            ));
        }
        let integration_step = self.integration_step.unwrap_or(self.epoch_step.min(60.0));
        if !(integration_step.is_finite() && integration_step > 0.0) {
            return Err(sem("integration_step", format!("must be > 0 (got {integration_step})")));
        }
        if !(self.weight_cap.is_finite() && self.weight_cap > 0.0 && self.weight_cap <= 1.0) {
            return Err(sem(
                "weight_cap",
                format!("must lie in (0, 1] (got {})", self.weight_cap),
            ));
        }
        self.ephemeris.validate().map_err(|e| sem("ephemeris", e))?;
        self.corrections.validate().map_err(|e| sem("corrections", e))?;
        if self.clocks.is_empty() {
            return Err(sem("clocks", "at least one clock is required"));
        }

        let mut seen = HashSet::new();
        let mut clocks = Vec::with_capacity(self.clocks.len());
        for (i, c) in self.clocks.iter().enumerate() {
            let key = format!("clocks[{i}]");
            if c.id.is_empty() || c.id.chars().any(char::is_whitespace) {
                return Err(sem(
                    format!("{key}.id"),
                    format!("`{}` must be non-empty without whitespace", c.id),
                ));
            }
            if !seen.insert(c.id.as_str()) {
                return Err(sem(format!("{key}.id"), format!("duplicate clock id `{}`", c.id)));
            }
            c.worldline
                .validate(&self.ephemeris)
                .map_err(|e| sem(format!("{key}.worldline"), e))?;
            let model = ClockModel {
                frequency_offset: c.model.frequency_offset,
                linear_drift: c.model.linear_drift,
                white_fm_sigma: c.model.white_fm_sigma,
                rw_fm_sigma: c.model.rw_fm_sigma,
                seed: c.model.seed.unwrap_or_else(|| mix(self.seed ^ mix(i as u64 + 1))),
            };
            model.validate().map_err(|e| sem(format!("{key}.model"), e))?;
            clocks.push(ClockSpec {
                id: c.id.clone(),
                role: c.role,
                worldline: c.worldline.clone(),
                model,
            });
        }

        let mut names = HashSet::new();
        for (i, conv) in self.conventions.iter().enumerate() {
            if conv.name == FITTED {
                return Err(sem(format!("conventions[{i}].name"), "`fitted` is reserved"));
            }
            if !names.insert(conv.name.as_str()) {
                return Err(sem(
                    format!("conventions[{i}].name"),
                    format!("duplicate convention `{}`", conv.name),
                ));
            }
            conv.validate().map_err(|e| sem(format!("conventions[{i}]"), e))?;
        }

        for (i, link) in self.links.iter().enumerate() {
            for (end, id) in [("a", &link.a), ("b", &link.b)] {
                if !seen.contains(id.as_str()) {
                    return Err(sem(format!("links[{i}].{end}"), format!("unknown clock `{id}`")));
                }
            }
            link.validate().map_err(|e| sem(format!("links[{i}]"), e))?;
        }
        let nodes = clocks
            .iter()
            .map(|c| Node {
                id: c.id.clone(),
                role: c.role,
            })
            .collect();
        let topology = Topology::new(nodes, self.links.clone()).map_err(|e| sem("links", e))?;

        let periodic_source = match self.broadcast.periodic_model.as_str() {
            FITTED => PeriodicSource::Fitted,
            name => PeriodicSource::Convention(
                self.convention(name)
                    .cloned()
                    .ok_or_else(|| sem("broadcast.periodic_model", format!("unknown convention `{name}`")))?,
            ),
        };
        let b = &self.broadcast;
        let broadcast = BroadcastConfig {
            cadence: b.cadence,
            sync_mode: b.sync_mode,
            resync_interval: b.resync_interval,
            sample_step: self.epoch_step,
            agreement_threshold: b.agreement_threshold,
            relay: b.relay,
            turnaround: b.turnaround,
            periodic_source,
        };
        broadcast.validate().map_err(|e| sem("broadcast", e))?;
        if self.architecture.broadcast()
            && topology.dependents().next().is_some()
            && topology.authorities().next().is_none()
        {
            return Err(sem("clocks", "a broadcast network with dependents needs an authority"));
        }
        let transact = TransactConfig {
            cadence: self.transact.cadence,
            measurement_noise: self.transact.measurement_noise,
            staleness_rate: self.transact.staleness_rate,
        };
        transact.validate().map_err(|e| sem("transact", e))?;

        if let Some(s) = &self.sweep {
            if s.samples == 0 {
                return Err(sem("sweep.samples", "must be ≥ 1"));
            }
            if !(s.lower.is_finite() && s.lower >= 0.0 && s.upper.is_finite() && s.upper > s.lower) {
                return Err(sem(
                    "sweep",
                    format!("need 0 ≤ lower < upper (got {}, {})", s.lower, s.upper),
                ));
            }
            if !(s.epsilon >= 0.0 && s.neighbourhood >= 0.0) {
                return Err(sem("sweep", "epsilon and neighbourhood must be ≥ 0"));
            }
        }
        if let Some(h) = &self.horizon {
            for (end, id) in [("a", &h.a), ("b", &h.b)] {
                if !seen.contains(id.as_str()) {
                    return Err(sem(format!("horizon.{end}"), format!("unknown clock `{id}`")));
                }
            }
            if !(h.fit_window >= 30.0) {
                return Err(sem(
                    "horizon.fit_window",
                    format!("must be ≥ 30 days (got {})", h.fit_window),
                ));
            }
            if !(h.predict_window.is_finite() && h.predict_window >= h.fit_window) {
                return Err(sem("horizon.predict_window", "must be finite and ≥ fit_window"));
            }
            let positive = [
                ("anomaly_scale", h.anomaly_scale),
                ("sample_step", h.sample_step),
                ("integration_step", h.integration_step),
                ("threshold", h.threshold),
                ("deadline_years", h.deadline_years),
                ("control_tolerance", h.control_tolerance),
            ];
            for (key, v) in positive {
                if !(v.is_finite() && v > 0.0) {
                    return Err(sem(
                        format!("horizon.{key}"),
                        format!("must be finite and > 0 (got {v})"),
                    ));
                }
            }
            if h.harmonics == 0 {
                return Err(sem("horizon.harmonics", "must be ≥ 1"));
            }
        }
        for (i, check) in self.expect.iter().enumerate() {
            for (end, id) in [("a", &check.a), ("b", &check.b)] {
                if !seen.contains(id.as_str()) {
                    return Err(sem(format!("expect[{i}].{end}"), format!("unknown clock `{id}`")));
                }
            }
            if !(check.rate_us_per_day.is_finite() && check.tolerance.is_finite() && check.tolerance >= 0.0) {
                return Err(sem(
                    format!("expect[{i}]"),
                    "rate and tolerance must be finite, tolerance ≥ 0",
                ));
            }
        }
        Ok(Prepared {
            clocks,
            topology,
            broadcast,
            transact,
            integration_step,
        })
    }
}

/// Scenarios shipped with the binary, by name.
pub const BUNDLED: [(&str, &str); 5] = [
    ("anchor56", include_str!("../scenarios/anchor56.toml")),
    ("gps38", include_str!("../scenarios/gps38.toml")),
    ("finetune", include_str!("../scenarios/finetune.toml")),
    ("lunar_net", include_str!("../scenarios/lunar_net.toml")),
    ("horizon", include_str!("../scenarios/horizon.toml")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}
