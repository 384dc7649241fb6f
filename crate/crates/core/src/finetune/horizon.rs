use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::relkinematics::{proper_offset_series, EphemerisConfig, PotentialField, Worldline, SECONDS_PER_DAY};

/// Design family `{1, t, sin kωt, cos kωt : k = 1..=harmonics}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HarmonicModel {
    pub angular_frequency: f64,
    pub harmonics: usize,
}

impl HarmonicModel {
    /// Harmonics of the orbital period in `cfg`.
    pub fn orbital(cfg: &EphemerisConfig, harmonics: usize) -> Self {
        Self {
            angular_frequency: std::f64::consts::TAU / cfg.orbital_period,
            harmonics,
        }
    }

    pub fn columns(&self) -> usize {
        2 + 2 * self.harmonics
    }

    fn row(&self, t: f64, time_scale: f64) -> Vec<f64> {
        let mut row = Vec::with_capacity(self.columns());
        row.push(1.0);
        row.push(t / time_scale);
        for k in 1..=self.harmonics {
            let x = k as f64 * self.angular_frequency * t;
            row.push(x.sin());
            row.push(x.cos());
        }
        row
    }

    /// Least-squares fit of `values` at `epochs`. Fails explicitly when the
    /// design matrix is rank deficient.
    pub fn fit(&self, epochs: &[f64], values: &[f64]) -> Result<FittedModel> {
        if epochs.len() != values.len() {
            return Err(Error::input("epochs and values differ in length"));
        }
        let m = self.columns();
        if epochs.len() < m {
            return Err(Error::FitFailure(format!(
                "{} samples for {m} coefficients",
                epochs.len()
            )));
        }
        if epochs.iter().chain(values).any(|x| !x.is_finite()) {
            return Err(Error::FitFailure("non-finite sample".into()));
        }
        let time_scale = epochs.iter().fold(0.0f64, |a, t| a.max(t.abs())).max(1.0);
        let design = DMatrix::from_fn(epochs.len(), m, |i, j| self.row(epochs[i], time_scale)[j]);
        let svd = design.clone().svd(true, true);
        let max_sv = svd.singular_values.max();
        let min_sv = svd.singular_values.min();
        if !(min_sv > 1e-10 * max_sv) {
            return Err(Error::FitFailure(format!(
                "rank-deficient design (singular values {min_sv:e} to {max_sv:e})"
            )));
        }
        let rhs = DVector::from_column_slice(values);
        let solution = svd.solve(&rhs, 0.0).map_err(|e| Error::FitFailure(e.to_string()))?;
        let fitted = FittedModel {
            model: *self,
            time_scale,
            coefficients: solution.iter().copied().collect(),
            residual_max: 0.0,
        };
        let residual_max = epochs
            .iter()
            .zip(values)
            .map(|(&t, &v)| (fitted.evaluate(t) - v).abs())
            .fold(0.0, f64::max);
        Ok(FittedModel { residual_max, ..fitted })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FittedModel {
    pub model: HarmonicModel,
    time_scale: f64,
    pub coefficients: Vec<f64>,
    /// Largest |fit − sample| over the fitted samples.
    pub residual_max: f64,
}

impl FittedModel {
    pub fn evaluate(&self, t: f64) -> f64 {
        self.model
            .row(t, self.time_scale)
            .iter()
            .zip(&self.coefficients)
            .map(|(x, c)| x * c)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HorizonReport {
    pub fit: FittedModel,
    /// Seconds from the start of the fit window.
    pub epochs: Vec<f64>,
    /// |prediction − truth|, seconds.
    pub errors: Vec<f64>,
}

impl HorizonReport {
    pub fn max_error(&self) -> f64 {
        self.errors.iter().copied().fold(0.0, f64::max)
    }
}

/// First epoch at which the prediction error exceeds `threshold`.
pub fn crossing_epoch(report: &HorizonReport, threshold: f64) -> Option<f64> {
    report
        .epochs
        .iter()
        .zip(&report.errors)
        .find(|(_, e)| **e > threshold)
        .map(|(t, _)| *t)
}

/// Fit `model` to `fitted` over the first `fit_window` days, then compare
/// its extrapolation with `truth` over the first `predict_window` days.
///
/// `fitted` is what the predictor knows; `truth` is what happens. Passing
/// the same series for both measures pure extrapolation error.
pub fn long_horizon_prediction(
    fit_window: f64,
    predict_window: f64,
    fitted: &[(f64, f64)],
    truth: &[(f64, f64)],
    model: &HarmonicModel,
) -> Result<HorizonReport> {
    if !(fit_window >= 30.0) {
        return Err(Error::input(format!("fit window must be ≥ 30 days (got {fit_window})")));
    }
    if !(predict_window >= fit_window) {
        return Err(Error::input(format!(
            "predict window {predict_window} d is shorter than fit window {fit_window} d"
        )));
    }
    let fit_end = fit_window * SECONDS_PER_DAY * (1.0 + 1e-12);
    let (epochs, values): (Vec<f64>, Vec<f64>) = fitted.iter().copied().filter(|(t, _)| *t <= fit_end).unzip();
    let fit = model.fit(&epochs, &values)?;
    let predict_end = predict_window * SECONDS_PER_DAY * (1.0 + 1e-12);
    let (epochs, errors) = truth
        .iter()
        .filter(|(t, _)| *t <= predict_end)
        .map(|&(t, v)| (t, (fit.evaluate(t) - v).abs()))
        .unzip();
    Ok(HorizonReport { fit, epochs, errors })
}

/// `(t, τ_a − τ_b)` every `sample_step` seconds for `days` days, both clocks
/// starting level at t = 0.
pub fn offset_series(
    a: &Worldline,
    b: &Worldline,
    days: f64,
    sample_step: f64,
    integration_step: f64,
    cfg: &EphemerisConfig,
) -> Result<Vec<(f64, f64)>> {
    if !(days > 0.0 && sample_step > 0.0) {
        return Err(Error::input("need positive span and sample step"));
    }
    let field = PotentialField::earth_moon(cfg);
    let n = (days * SECONDS_PER_DAY / sample_step + 1e-9).floor() as usize + 1;
    let epochs: Vec<f64> = (0..n).map(|k| k as f64 * sample_step).collect();
    let pa = proper_offset_series(a, &epochs, integration_step, &field, cfg)?;
    let pb = proper_offset_series(b, &epochs, integration_step, &field, cfg)?;
    Ok(epochs.into_iter().zip(pa.iter().zip(&pb).map(|(x, y)| x - y)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(model: &HarmonicModel, days: f64) -> Vec<(f64, f64)> {
        let coeffs = [3e-6, 6.5e-10, 4.7e-7, -1.2e-7, 2.6e-8, 5e-9, 1e-9, -3e-10];
        (0..=days as usize)
            .map(|d| {
                let t = d as f64 * SECONDS_PER_DAY;
                let mut v = coeffs[0] + coeffs[1] * t;
                for k in 1..=model.harmonics {
                    let x = k as f64 * model.angular_frequency * t;
                    v += coeffs[2 * k] * x.sin() + coeffs[2 * k + 1] * x.cos();
                }
                (t, v)
            })
            .collect()
    }

    #[test]
    fn in_family_extrapolation_is_exact() {
        let model = HarmonicModel::orbital(&EphemerisConfig::default(), 3);
        let data = synthetic(&model, 9131.25);
        let report = long_horizon_prediction(30.0, 9131.25, &data, &data, &model).unwrap();
        assert!(report.max_error() < 1e-12, "{}", report.max_error());
    }

    #[test]
    fn equal_windows_stay_within_fit_residual() {
        let model = HarmonicModel::orbital(&EphemerisConfig::default(), 1);
        let mut data = synthetic(&HarmonicModel { harmonics: 3, ..model }, 40.0);
        for (k, d) in data.iter_mut().enumerate() {
            d.1 += if k % 2 == 0 { 1e-10 } else { -1e-10 };
        }
        let report = long_horizon_prediction(40.0, 40.0, &data, &data, &model).unwrap();
        assert!(report.max_error() <= report.fit.residual_max * (1.0 + 1e-9));
    }

    #[test]
    fn degenerate_designs_fail() {
        let model = HarmonicModel::orbital(&EphemerisConfig::default(), 2);
        let err = model.fit(&[0.0; 20], &[1.0; 20]).unwrap_err();
        assert!(matches!(err, Error::FitFailure(_)));
        assert!(matches!(model.fit(&[0.0, 1.0], &[0.0, 1.0]), Err(Error::FitFailure(_))));
    }

    #[test]
    fn window_preconditions() {
        let model = HarmonicModel::orbital(&EphemerisConfig::default(), 1);
        let data = synthetic(&model, 60.0);
        assert!(long_horizon_prediction(10.0, 60.0, &data, &data, &model).is_err());
        assert!(long_horizon_prediction(40.0, 35.0, &data, &data, &model).is_err());
    }

    #[test]
    fn crossing_reports_first_exceedance() {
        let report = HorizonReport {
            fit: HarmonicModel::orbital(&EphemerisConfig::default(), 0)
                .fit(&[0.0, 1.0], &[0.0, 0.0])
                .unwrap(),
            epochs: vec![0.0, 1.0, 2.0, 3.0],
            errors: vec![0.0, 0.1, 0.3, 0.2],
        };
        assert_eq!(crossing_epoch(&report, 0.25), Some(2.0));
        assert_eq!(crossing_epoch(&report, 1.0), None);
    }
}
