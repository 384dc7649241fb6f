//! Hardware clock imperfections and frequency-stability statistics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Deterministic and stochastic error terms of one oscillator.
///
/// `white_fm_sigma` is the Allan deviation at 1 s for white frequency noise.
/// `rw_fm_sigma` is the square root of the frequency diffusion rate, so that
/// a pure random-walk FM clock has `σ_y(τ) = rw_fm_sigma · sqrt(τ / 3)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ClockModel {
    pub frequency_offset: f64,
    pub linear_drift: f64,
    pub white_fm_sigma: f64,
    pub rw_fm_sigma: f64,
    pub seed: u64,
}

impl ClockModel {
    pub fn ideal() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("frequency_offset", self.frequency_offset),
            ("linear_drift", self.linear_drift),
        ] {
            if !v.is_finite() {
                return Err(Error::config(format!("{key} must be finite")));
            }
        }
        for (key, v) in [
            ("white_fm_sigma", self.white_fm_sigma),
            ("rw_fm_sigma", self.rw_fm_sigma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("{key} must be finite and ≥ 0 (got {v})")));
            }
        }
        Ok(())
    }

    /// Offset and drift contribution after `proper` seconds of proper time.
    pub fn deterministic_error(&self, proper: f64) -> f64 {
        self.frequency_offset * proper + 0.5 * self.linear_drift * proper * proper
    }

    pub fn is_noiseless(&self) -> bool {
        self.white_fm_sigma == 0.0 && self.rw_fm_sigma == 0.0
    }
}

/// Proper time along a worldline at one coordinate epoch, stored as the
/// offset `τ − t` so that nanosecond structure survives in f64.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProperSample {
    pub coordinate_epoch: f64,
    pub proper_offset: f64,
}

impl ProperSample {
    pub fn proper_time(&self) -> f64 {
        self.coordinate_epoch + self.proper_offset
    }
}

/// What a clock shows at a coordinate epoch alongside what it should show.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockReading {
    pub coordinate_epoch: f64,
    /// `τ − t` at this epoch.
    pub proper_offset: f64,
    /// `displayed − τ`: the hardware error.
    pub clock_error: f64,
}

impl ClockReading {
    pub fn true_proper_time(&self) -> f64 {
        self.coordinate_epoch + self.proper_offset
    }

    pub fn displayed_time(&self) -> f64 {
        self.true_proper_time() + self.clock_error
    }

    /// `displayed − t`.
    pub fn displayed_offset(&self) -> f64 {
        self.proper_offset + self.clock_error
    }
}

/// Apply `model` to a proper-time series.
///
/// White FM adds an independent phase step of `σ_w · sqrt(Δτ)` per
/// interval; random-walk FM integrates a frequency that itself diffuses
/// by `σ_rw · sqrt(Δτ)` per interval. The first sample carries no noise.
pub fn sample_clock(model: &ClockModel, proper: &[ProperSample]) -> Result<Vec<ClockReading>> {
    model.validate()?;
    for pair in proper.windows(2) {
        if !(pair[1].coordinate_epoch > pair[0].coordinate_epoch) {
            return Err(Error::input(format!(
                "epochs must be strictly increasing ({} then {})",
                pair[0].coordinate_epoch, pair[1].coordinate_epoch
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let mut phase = 0.0;
    let mut freq = 0.0;
    let mut out = Vec::with_capacity(proper.len());
    for (k, sample) in proper.iter().enumerate() {
        if k > 0 && !model.is_noiseless() {
            let dtau = sample.proper_time() - proper[k - 1].proper_time();
            let root = dtau.sqrt();
            let white: f64 = StandardNormal.sample(&mut rng);
            let walk: f64 = StandardNormal.sample(&mut rng);
            phase += freq * dtau + model.white_fm_sigma * root * white;
            freq += model.rw_fm_sigma * root * walk;
        }
        out.push(ClockReading {
            coordinate_epoch: sample.coordinate_epoch,
            proper_offset: sample.proper_offset,
            clock_error: model.deterministic_error(sample.proper_time()) + phase,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdevPoint {
    pub tau: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdevReport {
    pub points: Vec<AdevPoint>,
    /// Requested taus that had too few samples or were not a multiple of
    /// the sampling interval.
    pub omitted: Vec<f64>,
}

/// Overlapping Allan deviation of the hardware error in `readings`.
pub fn allan_deviation(readings: &[ClockReading], taus: &[f64]) -> Result<AdevReport> {
    if readings.len() < 3 {
        return Err(Error::input("need at least 3 readings"));
    }
    let tau0 = readings[1].coordinate_epoch - readings[0].coordinate_epoch;
    for pair in readings.windows(2) {
        let dt = pair[1].coordinate_epoch - pair[0].coordinate_epoch;
        if !(dt > 0.0) || ((dt - tau0) / tau0).abs() > 1e-9 {
            return Err(Error::input("readings must be uniformly sampled"));
        }
    }
    let phase: Vec<f64> = readings.iter().map(|r| r.clock_error).collect();
    let mut sorted: Vec<f64> = taus.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut report = AdevReport::default();
    for tau in sorted {
        let m = (tau / tau0).round();
        let integral = m >= 1.0 && ((m * tau0 - tau) / tau).abs() < 1e-9;
        let m = m as usize;
        if !integral || phase.len() < 2 * m + 1 {
            report.omitted.push(tau);
            continue;
        }
        let terms = phase.len() - 2 * m;
        let sum: f64 = (0..terms)
            .map(|i| {
                let d = phase[i + 2 * m] - 2.0 * phase[i + m] + phase[i];
                d * d
            })
            .sum();
        let t = m as f64 * tau0;
        let var = sum / (2.0 * t * t * terms as f64);
        report.points.push(AdevPoint {
            tau: t,
            sigma: var.sqrt(),
        });
    }
    Ok(report)
}

/// Least-squares slope of `ln σ` against `ln τ`.
pub fn log_log_slope(points: &[AdevPoint]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = points.iter().map(|p| p.tau.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.sigma.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Ideal proper-time samples at unit rate: convenient for noise studies.
pub fn uniform_proper_samples(count: usize, interval: f64) -> Vec<ProperSample> {
    (0..count)
        .map(|k| ProperSample {
            coordinate_epoch: k as f64 * interval,
            proper_offset: 0.0,
        })
        .collect()
}

/// Geometric sequence of `count` taus from `lo` to `hi`, rounded to whole
/// multiples of `tau0`.
pub fn log_spaced_taus(lo: f64, hi: f64, count: usize, tau0: f64) -> Vec<f64> {
    let mut taus: Vec<f64> = (0..count)
        .map(|k| {
            let f = k as f64 / (count.max(2) - 1) as f64;
            let tau = lo * (hi / lo).powf(f);
            (tau / tau0).round().max(1.0) * tau0
        })
        .collect();
    taus.dedup();
    taus
}
