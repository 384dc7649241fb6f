//! The five correction families a dependent node applies to its estimate
//! of the ensemble offset, and their decomposition from ground truth.
//!
//! A dependent's target is `O(t) = E(t) − D(t)`: ensemble offset minus its
//! own displayed offset. Between syncs it propagates its last estimate with
//! a model built from four families (secular rate, periodic terms, local
//! potential anomaly, hardware drift); the fifth family scales the assumed
//! signal delay. Each family carries a multiplier: 1 applies it in full,
//! 0 switches it off.

use serde::{Deserialize, Serialize};

use crate::coordmodels::CoordinateConvention;
use crate::error::{Error, Result};
use crate::truth::TruthTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Secular,
    Periodic,
    Anomaly,
    Drift,
    Delay,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Secular,
        Family::Periodic,
        Family::Anomaly,
        Family::Drift,
        Family::Delay,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Secular => "secular",
            Family::Periodic => "periodic",
            Family::Anomaly => "anomaly",
            Family::Drift => "drift",
            Family::Delay => "delay",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorrectionVector {
    pub secular_scale: f64,
    pub periodic_scale: f64,
    pub anomaly_scale: f64,
    pub drift_scale: f64,
    pub delay_scale: f64,
}

impl Default for CorrectionVector {
    fn default() -> Self {
        Self::TUNED
    }
}

impl CorrectionVector {
    pub const TUNED: Self = Self::uniform(1.0);

    pub const fn uniform(scale: f64) -> Self {
        Self {
            secular_scale: scale,
            periodic_scale: scale,
            anomaly_scale: scale,
            drift_scale: scale,
            delay_scale: scale,
        }
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self {
            secular_scale: a[0],
            periodic_scale: a[1],
            anomaly_scale: a[2],
            drift_scale: a[3],
            delay_scale: a[4],
        }
    }

    pub fn to_array(self) -> [f64; 5] {
        [
            self.secular_scale,
            self.periodic_scale,
            self.anomaly_scale,
            self.drift_scale,
            self.delay_scale,
        ]
    }

    pub fn get(&self, f: Family) -> f64 {
        self.to_array()[f as usize]
    }

    pub fn with(self, f: Family, scale: f64) -> Self {
        let mut a = self.to_array();
        a[f as usize] = scale;
        Self::from_array(a)
    }

    /// Largest per-family distance from `other`.
    pub fn max_norm_distance(&self, other: &Self) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        for f in Family::ALL {
            let v = self.get(f);
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!(
                    "{}_scale must be finite and ≥ 0 (got {v})",
                    f.name()
                )));
            }
        }
        Ok(())
    }
}

/// Where a dependent's periodic correction comes from.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum PeriodicSource {
    /// The periodic part of the true offset, as a perfectly informed model.
    #[default]
    Fitted,
    /// A coordinate convention's periodic terms, which need not match the
    /// physics the truth is built from.
    Convention(CoordinateConvention),
}

/// Per-family model series for one dependent on the truth grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionFamilies {
    pub secular: Vec<f64>,
    pub periodic: Vec<f64>,
    pub anomaly: Vec<f64>,
    pub drift: Vec<f64>,
}

impl CorrectionFamilies {
    /// Split the deterministic part of `O = E − D_i` into families.
    ///
    /// The anomaly and drift terms are exact: the weighted authority
    /// potential anomaly minus the dependent's, times elapsed time, and the
    /// weighted deterministic hardware errors minus the dependent's. What is
    /// left of the relativistic offset is split into a least-squares line
    /// (secular) and its residual (periodic). Hardware noise is left out.
    pub fn decompose(truth: &TruthTable, dependent: usize, periodic: &PeriodicSource) -> Result<Self> {
        if truth.ensemble_offsets().is_none() {
            return Err(Error::config("dependent corrections need at least one authority clock"));
        }
        let c2 = truth.ephemeris().c2();
        let clocks = truth.clocks();
        let weighted = |f: &dyn Fn(usize) -> f64| -> f64 {
            truth
                .authorities()
                .iter()
                .zip(truth.weights())
                .map(|(&j, &w)| w * f(j))
                .sum()
        };
        let anomaly_rate =
            (weighted(&|j| clocks[j].worldline.mascon_anomaly()) - clocks[dependent].worldline.mascon_anomaly()) / c2;

        let n = truth.len();
        let mut anomaly = Vec::with_capacity(n);
        let mut drift = Vec::with_capacity(n);
        let mut relativistic = Vec::with_capacity(n);
        for k in 0..n {
            let t = truth.epoch(k);
            let proper = |j: usize| truth.proper_offsets(j)[k];
            let hardware = |j: usize| clocks[j].model.deterministic_error(t + proper(j));
            let a = anomaly_rate * t;
            anomaly.push(a);
            drift.push(weighted(&hardware) - hardware(dependent));
            relativistic.push(weighted(&proper) - proper(dependent) - a);
        }

        let slope = fit_slope(truth, &relativistic);
        let secular: Vec<f64> = (0..n).map(|k| slope * truth.epoch(k)).collect();
        let periodic = match periodic {
            PeriodicSource::Fitted => relativistic.iter().zip(&secular).map(|(g, s)| g - s).collect(),
            PeriodicSource::Convention(c) => (0..n).map(|k| c.periodic_offset(truth.epoch(k))).collect(),
        };
        Ok(Self {
            secular,
            periodic,
            anomaly,
            drift,
        })
    }

    /// `Σ scale_f · C_f` on the grid. The delay family acts elsewhere.
    pub fn combined(&self, v: &CorrectionVector) -> Vec<f64> {
        (0..self.secular.len())
            .map(|k| {
                v.secular_scale * self.secular[k]
                    + v.periodic_scale * self.periodic[k]
                    + v.anomaly_scale * self.anomaly[k]
                    + v.drift_scale * self.drift[k]
            })
            .collect()
    }
}

fn fit_slope(truth: &TruthTable, y: &[f64]) -> f64 {
    let n = y.len() as f64;
    if y.len() < 2 {
        return 0.0;
    }
    let mt = (0..y.len()).map(|k| truth.epoch(k)).sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (k, &v) in y.iter().enumerate() {
        let dt = truth.epoch(k) - mt;
        sxy += dt * (v - my);
        sxx += dt * dt;
    }
    sxy / sxx
}
