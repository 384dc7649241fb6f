//! Sensitivity of network agreement to the correction families, the
//! convention-swap experiment, and long-horizon prediction.

mod horizon;
mod swap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::broadcastnet::BroadcastSetup;
use crate::error::{Error, Result};

pub use crate::corrections::{CorrectionVector, Family};
pub use horizon::{crossing_epoch, long_horizon_prediction, offset_series, FittedModel, HarmonicModel, HorizonReport};
pub use swap::{model_swap, ModelSwap, SwapRow};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepResult {
    pub vector: CorrectionVector,
    pub rms_sync_error: f64,
    /// Seconds per day.
    pub divergence_rate: f64,
    pub agreement_fraction: f64,
    /// Worst-pair disagreement over the run, seconds.
    pub max_pair_disagreement: f64,
}

/// One broadcast run per vector, in parallel. The first failing vector (by
/// position) aborts the sweep and is named in the error.
pub fn sweep_corrections(setup: &BroadcastSetup, vectors: &[CorrectionVector]) -> Result<Vec<SweepResult>> {
    let outcomes: Vec<Result<SweepResult>> = vectors
        .par_iter()
        .map(|v| {
            let run = setup.run(v, false)?;
            Ok(SweepResult {
                vector: *v,
                rms_sync_error: run.stats.rms_sync_error,
                divergence_rate: run.stats.divergence_rate,
                agreement_fraction: run.stats.agreement_fraction,
                max_pair_disagreement: run.stats.max_pair_disagreement,
            })
        })
        .collect();
    outcomes
        .into_iter()
        .enumerate()
        .map(|(index, r)| {
            r.map_err(|e| Error::Sweep {
                index,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Fraction of results whose worst-pair disagreement is below `epsilon`.
pub fn faithfulness_score(results: &[SweepResult], epsilon: f64) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::input("faithfulness score of an empty sweep"));
    }
    if epsilon.is_nan() {
        return Err(Error::input("epsilon is NaN"));
    }
    let passing = results.iter().filter(|r| r.max_pair_disagreement < epsilon).count();
    Ok(passing as f64 / results.len() as f64)
}

/// Seeded Latin-hypercube sample of `n` vectors in `[lo, hi]⁵`.
pub fn latin_hypercube(n: usize, lo: f64, hi: f64, seed: u64) -> Result<Vec<CorrectionVector>> {
    if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && hi > lo) {
        return Err(Error::input(format!("need 0 ≤ lo < hi (got {lo}, {hi})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns = Vec::with_capacity(5);
    for _ in 0..5 {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(&mut rng);
        let column: Vec<f64> = strata
            .into_iter()
            .map(|s| lo + (hi - lo) * (s as f64 + rng.random::<f64>()) / n as f64)
            .collect();
        columns.push(column);
    }
    Ok((0..n)
        .map(|i| {
            CorrectionVector::from_array([
                columns[0][i],
                columns[1][i],
                columns[2][i],
                columns[3][i],
                columns[4][i],
            ])
        })
        .collect())
}
