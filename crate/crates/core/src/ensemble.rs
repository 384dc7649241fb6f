//! Weighted "paper clock" built from authority clock readings.

use serde::Serialize;

use crate::clockmodels::ClockReading;
use crate::error::{Error, Result};

/// No single clock may carry more than this share of the ensemble.
pub const DEFAULT_WEIGHT_CAP: f64 = 0.4;

/// Inverse-variance weights with a per-clock cap.
///
/// Clocks whose raw share exceeds the cap are pinned at the cap and the
/// remaining mass is shared among the rest in proportion to `1/σ²`,
/// repeating until no uncapped clock exceeds the cap. When the cap cannot
/// be honoured (fewer than `1/cap` clocks) it is raised to `1/n`. A clock
/// with σ = 0 is capped outright.
pub fn compute_weights(sigmas: &[f64], cap: f64) -> Result<Vec<f64>> {
    if sigmas.is_empty() {
        return Err(Error::input("ensemble needs at least one member"));
    }
    if !(cap > 0.0 && cap <= 1.0) {
        return Err(Error::input(format!("weight cap {cap} outside (0, 1]")));
    }
    if let Some(bad) = sigmas.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
        return Err(Error::input(format!("stability estimate {bad} must be finite and ≥ 0")));
    }
    let n = sigmas.len();
    let cap = cap.max(1.0 / n as f64);
    let raw: Vec<f64> = sigmas.iter().map(|s| 1.0 / (s * s)).collect();
    let mut capped: Vec<bool> = raw.iter().map(|r| r.is_infinite()).collect();

    let pinned = capped.iter().filter(|c| **c).count();
    if pinned as f64 * cap >= 1.0 {
        let share = 1.0 / pinned as f64;
        return Ok(capped.iter().map(|&c| if c { share } else { 0.0 }).collect());
    }

    let mut weights = vec![0.0; n];
    loop {
        let pinned = capped.iter().filter(|c| **c).count();
        let remaining = 1.0 - pinned as f64 * cap;
        let free_raw: f64 = (0..n).filter(|&i| !capped[i]).map(|i| raw[i]).sum();
        let mut violated = false;
        for i in 0..n {
            weights[i] = if capped[i] { cap } else { remaining * raw[i] / free_raw };
        }
        for i in 0..n {
            if !capped[i] && weights[i] > cap * (1.0 + 1e-12) {
                capped[i] = true;
                violated = true;
            }
        }
        if !violated {
            return Ok(weights);
        }
    }
}

/// Ensemble output at one epoch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleTime {
    pub epoch: f64,
    /// `paper_time − epoch`.
    pub paper_offset: f64,
    /// Indices of members with no reading at this epoch.
    pub excluded: Vec<usize>,
}

impl EnsembleTime {
    pub fn paper_time(&self) -> f64 {
        self.epoch + self.paper_offset
    }
}

/// Weighted mean of the members' displayed times. Missing readings are
/// dropped and the surviving weights renormalized for this epoch only.
pub fn ensemble_time(readings: &[Option<ClockReading>], weights: &[f64]) -> Result<EnsembleTime> {
    if readings.len() != weights.len() {
        return Err(Error::input(format!(
            "{} readings for {} weights",
            readings.len(),
            weights.len()
        )));
    }
    let epoch = readings
        .iter()
        .flatten()
        .map(|r| r.coordinate_epoch)
        .next()
        .ok_or_else(|| Error::input("no member readings at this epoch"))?;
    let mut excluded = Vec::new();
    let (mut sum, mut total) = (0.0, 0.0);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, (reading, &w)) in readings.iter().zip(weights).enumerate() {
        match reading {
            Some(r) => {
                if r.coordinate_epoch != epoch {
                    return Err(Error::input(format!(
                        "member {i} read at {} instead of {epoch}",
                        r.coordinate_epoch
                    )));
                }
                let d = r.displayed_offset();
                sum += w * d;
                total += w;
                lo = lo.min(d);
                hi = hi.max(d);
            }
            None => excluded.push(i),
        }
    }
    if !(total > 0.0) {
        return Err(Error::input("all present members have zero weight"));
    }
    Ok(EnsembleTime {
        epoch,
        paper_offset: (sum / total).clamp(lo, hi),
        excluded,
    })
}

/// Passive ensemble state, updated once per epoch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleState {
    pub member_ids: Vec<String>,
    pub weights: Vec<f64>,
    pub paper_time: f64,
    pub last_update_epoch: f64,
}

impl EnsembleState {
    pub fn new(member_ids: Vec<String>, weights: Vec<f64>) -> Result<Self> {
        if member_ids.is_empty() || member_ids.len() != weights.len() {
            return Err(Error::input(
                "ensemble needs one weight per member and at least one member",
            ));
        }
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|w| *w < 0.0) || (sum - 1.0).abs() > 1e-12 {
            return Err(Error::input(format!("weights must be ≥ 0 and sum to 1 (sum {sum})")));
        }
        Ok(Self {
            member_ids,
            weights,
            paper_time: f64::NAN,
            last_update_epoch: f64::NAN,
        })
    }

    pub fn update(&mut self, readings: &[Option<ClockReading>]) -> Result<EnsembleTime> {
        let out = ensemble_time(readings, &self.weights)?;
        self.paper_time = out.paper_time();
        self.last_update_epoch = out.epoch;
        Ok(out)
    }
}
