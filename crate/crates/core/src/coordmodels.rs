//! Coordinate-time conventions: relabelings of the reference coordinate time
//! by a secular rate offset plus a stack of sinusoids.
//!
//! A convention owns no physical state. Nothing in [`crate::relkinematics`]
//! or the clock models takes a convention as input, so proper-time
//! comparisons cannot depend on which one is in force.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Synodic month in seconds; the default periodic terms oscillate at it.
pub const SYNODIC_MONTH: f64 = 29.530_589 * 86_400.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodicTerm {
    /// Seconds.
    pub amplitude: f64,
    /// Radians per second.
    pub angular_frequency: f64,
    /// Radians.
    #[serde(default)]
    pub phase: f64,
}

impl PeriodicTerm {
    pub fn value(&self, t: f64) -> f64 {
        self.amplitude * (self.angular_frequency * t + self.phase).sin()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoordinateConvention {
    pub name: String,
    #[serde(default)]
    pub secular_rate_offset: f64,
    #[serde(default)]
    pub periodic_terms: Vec<PeriodicTerm>,
}

impl CoordinateConvention {
    /// Build and validate a convention.
    pub fn new(name: impl Into<String>, secular_rate_offset: f64, periodic_terms: Vec<PeriodicTerm>) -> Result<Self> {
        let conv = Self {
            name: name.into(),
            secular_rate_offset,
            periodic_terms,
        };
        conv.validate()?;
        Ok(conv)
    }

    pub fn identity(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            secular_rate_offset: 0.0,
            periodic_terms: Vec::new(),
        }
    }

    /// Rejects negative amplitudes and any parameterization whose label is
    /// not strictly increasing in reference time.
    pub fn validate(&self) -> Result<()> {
        if !self.secular_rate_offset.is_finite() {
            return Err(Error::config(format!(
                "convention {}: secular_rate_offset not finite",
                self.name
            )));
        }
        let mut max_slope = 0.0;
        for term in &self.periodic_terms {
            if !(term.amplitude.is_finite() && term.amplitude >= 0.0) {
                return Err(Error::config(format!(
                    "convention {}: amplitude must be ≥ 0 (got {})",
                    self.name, term.amplitude
                )));
            }
            if !(term.angular_frequency.is_finite() && term.phase.is_finite()) {
                return Err(Error::config(format!(
                    "convention {}: non-finite periodic term",
                    self.name
                )));
            }
            max_slope += term.amplitude * term.angular_frequency.abs();
        }
        if !(max_slope < 1.0 + self.secular_rate_offset) {
            return Err(Error::config(format!(
                "convention {}: label is not monotone (Σ A·ω = {max_slope} ≥ 1 + secular)",
                self.name
            )));
        }
        Ok(())
    }

    /// Sum of the periodic terms alone.
    pub fn periodic_offset(&self, t: f64) -> f64 {
        self.periodic_terms.iter().map(|p| p.value(t)).sum()
    }

    /// `label − t`, kept separate so that sub-nanosecond structure survives.
    pub fn label_offset(&self, reference_t: f64) -> f64 {
        reference_t * self.secular_rate_offset + self.periodic_offset(reference_t)
    }

    /// Coordinate label this convention assigns to reference time `t`.
    pub fn coordinate_label(&self, reference_t: f64) -> f64 {
        reference_t + self.label_offset(reference_t)
    }
}

/// Disagreement band between two conventions over a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Discrepancy {
    /// Largest |label_a − label_b| in the window.
    pub max: f64,
    /// Time-averaged |label_a − label_b|.
    pub mean: f64,
}

/// Scan `[t0, t1]` for the largest label disagreement between `a` and `b`.
///
/// The difference is sampled on a grid fine enough to resolve the fastest
/// term, and the best grid point is then polished by golden-section search.
pub fn convention_discrepancy(
    a: &CoordinateConvention,
    b: &CoordinateConvention,
    t0: f64,
    t1: f64,
) -> Result<Discrepancy> {
    if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
        return Err(Error::input(format!("need t1 > t0 (got {t0}, {t1})")));
    }
    let diff = |t: f64| (a.label_offset(t) - b.label_offset(t)).abs();
    let fastest = a
        .periodic_terms
        .iter()
        .chain(&b.periodic_terms)
        .map(|p| p.angular_frequency.abs())
        .fold(0.0, f64::max);
    let span = t1 - t0;
    let per_cycle = 64.0;
    let cycles = fastest * span / std::f64::consts::TAU;
    let n = ((cycles * per_cycle).ceil() as usize).clamp(256, 2_000_000);
    let h = span / n as f64;

    let mut best = (0usize, diff(t0));
    let mut integral = 0.0;
    let mut prev = best.1;
    for k in 1..=n {
        let t = if k == n { t1 } else { t0 + k as f64 * h };
        let v = diff(t);
        integral += 0.5 * (prev + v) * h;
        if v > best.1 {
            best = (k, v);
        }
        prev = v;
    }
    let lo = (t0 + (best.0 as f64 - 1.0) * h).max(t0);
    let hi = (t0 + (best.0 as f64 + 1.0) * h).min(t1);
    let polished = golden_max(&diff, lo, hi);
    Ok(Discrepancy {
        max: best.1.max(polished),
        mean: integral / span,
    })
}

fn golden_max(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - ratio * (hi - lo);
    let mut d = lo + ratio * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if hi - lo <= 1e-9 * hi.abs().max(1.0) {
            break;
        }
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - ratio * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + ratio * (hi - lo);
            fd = f(d);
        }
    }
    fc.max(fd).max(f(lo)).max(f(hi))
}

/// The two shipped conventions: same secular rate, periodic amplitudes of
/// 0.4 µs and 0.3 µs at the synodic frequency. Illustrative values only.
pub fn default_conventions() -> (CoordinateConvention, CoordinateConvention) {
    let omega = std::f64::consts::TAU / SYNODIC_MONTH;
    let term = |amplitude| PeriodicTerm {
        amplitude,
        angular_frequency: omega,
        phase: 0.0,
    };
    (
        CoordinateConvention {
            name: "ModelA".into(),
            secular_rate_offset: 0.0,
            periodic_terms: vec![term(0.4e-6)],
        },
        CoordinateConvention {
            name: "ModelB".into(),
            secular_rate_offset: 0.0,
            periodic_terms: vec![term(0.3e-6)],
        },
    )
}
