//! Ground truth for network runs: every clock's proper time and hardware
//! error on a shared uniform grid, plus the authority ensemble.
//!
//! Network nodes never read this table directly except through their own
//! displayed time; it exists so that runs can be scored.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::broadcastnet::Role;
use crate::clockmodels::{allan_deviation, sample_clock, ClockModel, ClockReading, ProperSample};
use crate::ensemble::{compute_weights, ensemble_time};
use crate::error::{Error, Result};
use crate::relkinematics::{proper_offset_series, EphemerisConfig, PotentialField, Worldline};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClockSpec {
    pub id: String,
    pub role: Role,
    pub worldline: Worldline,
    #[serde(default)]
    pub model: ClockModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthTable {
    ephemeris: EphemerisConfig,
    clocks: Vec<ClockSpec>,
    step: f64,
    len: usize,
    proper: Vec<Vec<f64>>,
    error: Vec<Vec<f64>>,
    authorities: Vec<usize>,
    weights: Vec<f64>,
    ensemble: Option<Vec<f64>>,
}

impl TruthTable {
    /// Tabulate `clocks` on the grid `0, step, 2·step, … ≤ duration`.
    pub fn build(
        ephemeris: &EphemerisConfig,
        clocks: Vec<ClockSpec>,
        duration: f64,
        step: f64,
        integration_step: f64,
        weight_cap: f64,
    ) -> Result<Self> {
        Self::build_in_field(
            ephemeris,
            &PotentialField::earth_moon(ephemeris),
            clocks,
            duration,
            step,
            integration_step,
            weight_cap,
        )
    }

    pub fn build_in_field(
        ephemeris: &EphemerisConfig,
        field: &PotentialField,
        clocks: Vec<ClockSpec>,
        duration: f64,
        step: f64,
        integration_step: f64,
        weight_cap: f64,
    ) -> Result<Self> {
        ephemeris.validate()?;
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::config(format!("duration must be > 0 (got {duration})")));
        }
        if !(step.is_finite() && step > 0.0 && step <= duration) {
            return Err(Error::config(format!("grid step {step} must lie in (0, duration]")));
        }
        if !(integration_step.is_finite() && integration_step > 0.0) {
            return Err(Error::config("integration_step must be > 0"));
        }
        if clocks.is_empty() {
            return Err(Error::config("at least one clock is required"));
        }
        for c in &clocks {
            c.worldline.validate(ephemeris).map_err(|e| prefix(&c.id, e))?;
            c.model.validate().map_err(|e| prefix(&c.id, e))?;
        }
        let len = (duration / step + 1e-9).floor() as usize + 1;
        let epochs: Vec<f64> = (0..len).map(|k| k as f64 * step).collect();

        let columns: Vec<(Vec<f64>, Vec<f64>)> = clocks
            .par_iter()
            .map(|c| {
                let proper = proper_offset_series(&c.worldline, &epochs, integration_step, field, ephemeris)?;
                let samples: Vec<ProperSample> = epochs
                    .iter()
                    .zip(&proper)
                    .map(|(&t, &p)| ProperSample {
                        coordinate_epoch: t,
                        proper_offset: p,
                    })
                    .collect();
                let error = sample_clock(&c.model, &samples)?
                    .into_iter()
                    .map(|r| r.clock_error)
                    .collect();
                Ok((proper, error))
            })
            .collect::<Result<_>>()?;
        let (proper, error): (Vec<_>, Vec<_>) = columns.into_iter().unzip();

        let mut table = Self {
            ephemeris: ephemeris.clone(),
            clocks,
            step,
            len,
            proper,
            error,
            authorities: Vec::new(),
            weights: Vec::new(),
            ensemble: None,
        };
        table.authorities = (0..table.clocks.len())
            .filter(|&i| table.clocks[i].role == Role::Authority)
            .collect();
        if !table.authorities.is_empty() {
            let sigmas: Vec<f64> = table
                .authorities
                .iter()
                .map(|&i| table.stability(i))
                .collect::<Result<_>>()?;
            table.weights = compute_weights(&sigmas, weight_cap)?;
            let mut series = Vec::with_capacity(len);
            for k in 0..len {
                let readings: Vec<Option<ClockReading>> =
                    table.authorities.iter().map(|&i| Some(table.reading(i, k))).collect();
                series.push(ensemble_time(&readings, &table.weights)?.paper_offset);
            }
            table.ensemble = Some(series);
        }
        Ok(table)
    }

    /// Allan deviation at the grid interval, or zero with too few samples.
    fn stability(&self, i: usize) -> Result<f64> {
        if self.len < 3 {
            return Ok(0.0);
        }
        let readings: Vec<ClockReading> = (0..self.len).map(|k| self.reading(i, k)).collect();
        let report = allan_deviation(&readings, &[self.step])?;
        Ok(report.points.first().map_or(0.0, |p| p.sigma))
    }

    pub fn ephemeris(&self) -> &EphemerisConfig {
        &self.ephemeris
    }

    pub fn clocks(&self) -> &[ClockSpec] {
        &self.clocks
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.clocks.iter().position(|c| c.id == id)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn epoch(&self, k: usize) -> f64 {
        k as f64 * self.step
    }

    pub fn end(&self) -> f64 {
        self.epoch(self.len - 1)
    }

    pub fn proper_offsets(&self, i: usize) -> &[f64] {
        &self.proper[i]
    }

    pub fn clock_errors(&self, i: usize) -> &[f64] {
        &self.error[i]
    }

    pub fn reading(&self, i: usize, k: usize) -> ClockReading {
        ClockReading {
            coordinate_epoch: self.epoch(k),
            proper_offset: self.proper[i][k],
            clock_error: self.error[i][k],
        }
    }

    pub fn displayed_offset(&self, i: usize, k: usize) -> f64 {
        self.proper[i][k] + self.error[i][k]
    }

    /// `displayed − t` for clock `i` at any epoch in the table's span.
    pub fn displayed_offset_at(&self, i: usize, t: f64) -> f64 {
        self.interpolate(&self.proper[i], t) + self.interpolate(&self.error[i], t)
    }

    pub fn authorities(&self) -> &[usize] {
        &self.authorities
    }

    /// Ensemble weights, aligned with [`Self::authorities`].
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Ensemble `paper − t` on the grid, when there are authorities.
    pub fn ensemble_offsets(&self) -> Option<&[f64]> {
        self.ensemble.as_deref()
    }

    pub fn ensemble_offset_at(&self, t: f64) -> Option<f64> {
        self.ensemble.as_ref().map(|e| self.interpolate(e, t))
    }

    /// Linear interpolation of a grid series, clamped to the table's span.
    pub fn interpolate(&self, series: &[f64], t: f64) -> f64 {
        let x = (t / self.step).clamp(0.0, (self.len - 1) as f64);
        let k = (x.floor() as usize).min(self.len.saturating_sub(2));
        if self.len == 1 {
            return series[0];
        }
        let f = x - k as f64;
        if f == 0.0 {
            series[k]
        } else {
            series[k] + f * (series[k + 1] - series[k])
        }
    }
}

fn prefix(id: &str, e: Error) -> Error {
    match e {
        Error::Config(m) => Error::Config(format!("clock {id}: {m}")),
        Error::Input(m) => Error::Config(format!("clock {id}: {m}")),
        other => other,
    }
}
