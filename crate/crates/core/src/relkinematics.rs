//! Earth-Moon geometry and proper-time integration.
//!
//! Positions live in a nonrotating frame centred on the Earth-Moon
//! barycentre. The Moon's orbit about the Earth is a fixed Keplerian
//! ellipse in the xy-plane with perigee on the +x axis at t = 0, and both
//! bodies spin about +z. Clock rates follow the weak-field law
//! `dτ/dt = 1 + Φ/c² − v²/(2c²)`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec3::Vec3;

pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// Physical constants of the simplified Earth-Moon system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EphemerisConfig {
    pub earth_gm: f64,
    pub moon_gm: f64,
    pub earth_radius: f64,
    pub moon_radius: f64,
    /// Semi-major axis of the relative orbit.
    pub earth_moon_distance: f64,
    pub orbital_eccentricity: f64,
    pub orbital_period: f64,
    /// Sidereal rotation period of the Earth.
    pub earth_spin_period: f64,
    pub speed_of_light: f64,
}

impl Default for EphemerisConfig {
    fn default() -> Self {
        Self {
            earth_gm: 3.986_004_418e14,
            moon_gm: 4.9028e12,
            earth_radius: 6.378_137e6,
            moon_radius: 1.7374e6,
            earth_moon_distance: 3.84399e8,
            orbital_eccentricity: 0.0549,
            orbital_period: 27.321_661 * SECONDS_PER_DAY,
            earth_spin_period: 86_164.090_5,
            speed_of_light: 299_792_458.0,
        }
    }
}

impl EphemerisConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("earth_gm", self.earth_gm),
            ("moon_gm", self.moon_gm),
            ("earth_radius", self.earth_radius),
            ("moon_radius", self.moon_radius),
            ("earth_moon_distance", self.earth_moon_distance),
            ("orbital_period", self.orbital_period),
            ("earth_spin_period", self.earth_spin_period),
            ("speed_of_light", self.speed_of_light),
        ];
        for (key, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::config(format!(
                    "ephemeris.{key} must be finite and > 0 (got {value})"
                )));
            }
        }
        let e = self.orbital_eccentricity;
        if !(e.is_finite() && (0.0..1.0).contains(&e)) {
            return Err(Error::config(format!(
                "ephemeris.orbital_eccentricity must satisfy 0 ≤ e < 1 (got {e})"
            )));
        }
        Ok(())
    }

    pub fn c2(&self) -> f64 {
        self.speed_of_light * self.speed_of_light
    }

    fn mean_motion(&self) -> f64 {
        TAU / self.orbital_period
    }

    fn gm(&self, body: Body) -> f64 {
        match body {
            Body::Earth => self.earth_gm,
            Body::Moon => self.moon_gm,
        }
    }

    fn radius(&self, body: Body) -> f64 {
        match body {
            Body::Earth => self.earth_radius,
            Body::Moon => self.moon_radius,
        }
    }

    /// Position and velocity of the Moon relative to the Earth.
    fn relative_state(&self, t: f64) -> (Vec3, Vec3) {
        let e = self.orbital_eccentricity;
        let a = self.earth_moon_distance;
        let n = self.mean_motion();
        let mean_anomaly = (t / self.orbital_period).rem_euclid(1.0) * TAU;
        let ecc_anomaly = solve_kepler(mean_anomaly, e);
        let (sin_e, cos_e) = ecc_anomaly.sin_cos();
        let b_over_a = (1.0 - e * e).sqrt();
        let rate = n / (1.0 - e * cos_e);
        let pos = Vec3::new(a * (cos_e - e), a * b_over_a * sin_e, 0.0);
        let vel = Vec3::new(-a * sin_e * rate, a * b_over_a * cos_e * rate, 0.0);
        (pos, vel)
    }
}

/// Newton iteration on `M = E − e sin E`.
fn solve_kepler(mean_anomaly: f64, e: f64) -> f64 {
    let mut ecc = if e < 0.8 { mean_anomaly } else { std::f64::consts::PI };
    for _ in 0..50 {
        let f = ecc - e * ecc.sin() - mean_anomaly;
        let step = f / (1.0 - e * ecc.cos());
        ecc -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    ecc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Body {
    Earth,
    Moon,
}

impl Body {
    pub fn name(self) -> &'static str {
        match self {
            Body::Earth => "earth",
            Body::Moon => "moon",
        }
    }
}

/// Barycentric position and velocity of a body.
pub fn body_state(body: Body, t: f64, cfg: &EphemerisConfig) -> (Vec3, Vec3) {
    let (rel_pos, rel_vel) = cfg.relative_state(t);
    let total = cfg.earth_gm + cfg.moon_gm;
    let share = match body {
        Body::Earth => -cfg.moon_gm / total,
        Body::Moon => cfg.earth_gm / total,
    };
    (rel_pos * share, rel_vel * share)
}

pub fn body_position(body: Body, t: f64, cfg: &EphemerisConfig) -> Vec3 {
    body_state(body, t, cfg).0
}

pub fn body_velocity(body: Body, t: f64, cfg: &EphemerisConfig) -> Vec3 {
    body_state(body, t, cfg).1
}

/// Trajectory of a clock. Angles are in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Worldline {
    /// Co-rotating with the Earth on its reference sphere.
    EarthSurface { latitude: f64, longitude: f64 },
    /// Co-rotating with the Moon; longitude 0 faces the Earth. The mascon
    /// anomaly is a scalar potential offset in m²/s² (negative = deeper well).
    MoonSurface {
        latitude: f64,
        longitude: f64,
        #[serde(default)]
        mascon_anomaly: f64,
    },
    /// Circular equatorial orbit about the Earth.
    EarthOrbit { radius: f64 },
    /// Circular equatorial orbit about the Moon.
    MoonOrbit { radius: f64 },
    /// At rest in the barycentric frame.
    Fixed { position: Vec3 },
}

impl Worldline {
    pub fn validate(&self, cfg: &EphemerisConfig) -> Result<()> {
        let check_angles = |lat: f64, lon: f64| {
            if !(lat.is_finite() && (-90.0..=90.0).contains(&lat)) {
                return Err(Error::config(format!("latitude {lat} outside [-90, 90]")));
            }
            if !lon.is_finite() {
                return Err(Error::config(format!("longitude {lon} not finite")));
            }
            Ok(())
        };
        match *self {
            Worldline::EarthSurface { latitude, longitude } => check_angles(latitude, longitude),
            Worldline::MoonSurface {
                latitude,
                longitude,
                mascon_anomaly,
            } => {
                check_angles(latitude, longitude)?;
                if !mascon_anomaly.is_finite() {
                    return Err(Error::config("mascon_anomaly not finite"));
                }
                Ok(())
            }
            Worldline::EarthOrbit { radius } if !(radius > cfg.earth_radius) => Err(Error::config(format!(
                "earth_orbit radius {radius} m is inside the Earth"
            ))),
            Worldline::MoonOrbit { radius } if !(radius > cfg.moon_radius) => Err(Error::config(format!(
                "moon_orbit radius {radius} m is inside the Moon"
            ))),
            Worldline::Fixed { position } if !position.is_finite() => Err(Error::config("fixed position not finite")),
            _ => Ok(()),
        }
    }

    /// Site potential offset carried by the worldline itself.
    pub fn mascon_anomaly(&self) -> f64 {
        match *self {
            Worldline::MoonSurface { mascon_anomaly, .. } => mascon_anomaly,
            _ => 0.0,
        }
    }

    /// Copy with the mascon anomaly multiplied by `scale`.
    pub fn with_anomaly_scaled(&self, scale: f64) -> Worldline {
        match *self {
            Worldline::MoonSurface {
                latitude,
                longitude,
                mascon_anomaly,
            } => Worldline::MoonSurface {
                latitude,
                longitude,
                mascon_anomaly: mascon_anomaly * scale,
            },
            ref other => other.clone(),
        }
    }

    /// Barycentric position and velocity at coordinate time `t`.
    pub fn state(&self, t: f64, cfg: &EphemerisConfig) -> (Vec3, Vec3) {
        match *self {
            Worldline::EarthSurface { latitude, longitude } => {
                let spin = TAU * t / cfg.earth_spin_period;
                surface_state(
                    Body::Earth,
                    latitude,
                    longitude,
                    spin,
                    TAU / cfg.earth_spin_period,
                    t,
                    cfg,
                )
            }
            Worldline::MoonSurface {
                latitude, longitude, ..
            } => {
                // Synchronous rotation: longitude 0 points at the Earth at perigee.
                let omega = cfg.mean_motion();
                let spin = std::f64::consts::PI + omega * t;
                surface_state(Body::Moon, latitude, longitude, spin, omega, t, cfg)
            }
            Worldline::EarthOrbit { radius } => orbit_state(Body::Earth, radius, t, cfg),
            Worldline::MoonOrbit { radius } => orbit_state(Body::Moon, radius, t, cfg),
            Worldline::Fixed { position } => (position, Vec3::ZERO),
        }
    }

    pub fn position(&self, t: f64, cfg: &EphemerisConfig) -> Vec3 {
        self.state(t, cfg).0
    }

    pub fn velocity(&self, t: f64, cfg: &EphemerisConfig) -> Vec3 {
        self.state(t, cfg).1
    }
}

fn surface_state(
    body: Body,
    latitude: f64,
    longitude: f64,
    spin_angle: f64,
    spin_rate: f64,
    t: f64,
    cfg: &EphemerisConfig,
) -> (Vec3, Vec3) {
    let (center, center_vel) = body_state(body, t, cfg);
    let r = cfg.radius(body);
    let (sin_lat, cos_lat) = latitude.to_radians().sin_cos();
    let (sin_az, cos_az) = (longitude.to_radians() + spin_angle).sin_cos();
    let offset = Vec3::new(r * cos_lat * cos_az, r * cos_lat * sin_az, r * sin_lat);
    let spin_vel = Vec3::new(-spin_rate * offset.y, spin_rate * offset.x, 0.0);
    (center + offset, center_vel + spin_vel)
}

fn orbit_state(body: Body, radius: f64, t: f64, cfg: &EphemerisConfig) -> (Vec3, Vec3) {
    let (center, center_vel) = body_state(body, t, cfg);
    let omega = (cfg.gm(body) / radius.powi(3)).sqrt();
    let (s, c) = (omega * t).sin_cos();
    let offset = Vec3::new(radius * c, radius * s, 0.0);
    let vel = Vec3::new(-radius * omega * s, radius * omega * c, 0.0);
    (center + offset, center_vel + vel)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointMass {
    pub gm: f64,
    pub center: Body,
}

/// Newtonian potential `Φ = offset − Σ GM/r` plus the site anomaly carried by
/// each worldline. `offset` is zero for a physical field; it exists so that
/// callers can check that only potential differences matter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialField {
    pub masses: Vec<PointMass>,
    pub offset: f64,
}

impl PotentialField {
    pub fn empty() -> Self {
        Self {
            masses: Vec::new(),
            offset: 0.0,
        }
    }

    pub fn earth_moon(cfg: &EphemerisConfig) -> Self {
        Self {
            masses: vec![
                PointMass {
                    gm: cfg.earth_gm,
                    center: Body::Earth,
                },
                PointMass {
                    gm: cfg.moon_gm,
                    center: Body::Moon,
                },
            ],
            offset: 0.0,
        }
    }

    pub fn shifted(&self, delta: f64) -> Self {
        Self {
            masses: self.masses.clone(),
            offset: self.offset + delta,
        }
    }

    /// Potential at `pos`, failing if the point lies inside a body.
    pub fn potential(&self, pos: Vec3, t: f64, cfg: &EphemerisConfig) -> Result<f64> {
        let mut phi = self.offset;
        for mass in &self.masses {
            let distance = (pos - body_position(mass.center, t, cfg)).norm();
            // Surface clocks sit exactly on the radius; allow rounding slack.
            if distance < cfg.radius(mass.center) * (1.0 - 1e-9) {
                return Err(Error::InsideBody {
                    body: mass.center.name(),
                    t,
                    distance,
                });
            }
            phi -= mass.gm / distance;
        }
        Ok(phi)
    }
}

/// `dτ/dt − 1` for a worldline, computed without forming `1 + small`.
pub fn rate_deviation(w: &Worldline, t: f64, field: &PotentialField, cfg: &EphemerisConfig) -> Result<f64> {
    let (pos, vel) = w.state(t, cfg);
    let phi = field.potential(pos, t, cfg)? + w.mascon_anomaly();
    let dev = (phi - 0.5 * vel.norm_squared()) / cfg.c2();
    if !dev.is_finite() {
        return Err(Error::Integration { t });
    }
    Ok(dev)
}

/// Proper-time rate `dτ/dt` at coordinate time `t`.
pub fn proper_rate(w: &Worldline, t: f64, field: &PotentialField, cfg: &EphemerisConfig) -> Result<f64> {
    Ok(1.0 + rate_deviation(w, t, field, cfg)?)
}

/// `τ(t1) − τ(t0) − (t1 − t0)`: the accumulated departure of proper time
/// from coordinate time, integrated with fixed steps of at most `step`.
///
/// Each step is a classical RK4 step; with no dependence on τ on the right
/// hand side this reduces to Simpson's rule. The last step is shortened to
/// land exactly on `t1`.
pub fn accumulate_proper_offset(
    w: &Worldline,
    t0: f64,
    t1: f64,
    step: f64,
    field: &PotentialField,
    cfg: &EphemerisConfig,
) -> Result<f64> {
    if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
        return Err(Error::input(format!("need t1 > t0 (got {t0}, {t1})")));
    }
    let span = t1 - t0;
    if !(step > 0.0 && step <= span * (1.0 + 1e-12)) {
        return Err(Error::input(format!(
            "step {step} must be positive and no longer than the interval {span}"
        )));
    }
    let steps = ((span / step) - 1e-9).ceil().max(1.0) as u64;
    let mut total = 0.0;
    let mut left = rate_deviation(w, t0, field, cfg)?;
    for k in 0..steps {
        let a = t0 + k as f64 * step;
        let b = if k + 1 == steps { t1 } else { t0 + (k + 1) as f64 * step };
        let h = b - a;
        let mid = rate_deviation(w, a + 0.5 * h, field, cfg)?;
        let right = rate_deviation(w, b, field, cfg)?;
        total += h * (left + 4.0 * mid + right) / 6.0;
        if !total.is_finite() {
            return Err(Error::Integration { t: b });
        }
        left = right;
    }
    Ok(total)
}

/// Proper seconds elapsed along `w` between coordinate times `t0` and `t1`.
pub fn accumulate_proper_time(
    w: &Worldline,
    t0: f64,
    t1: f64,
    step: f64,
    field: &PotentialField,
    cfg: &EphemerisConfig,
) -> Result<f64> {
    Ok((t1 - t0) + accumulate_proper_offset(w, t0, t1, step, field, cfg)?)
}

/// Proper-time offset `τ − t` sampled at each of `epochs`, starting from zero
/// at `epochs[0]`. Intervals longer than `max_step` are subdivided.
pub fn proper_offset_series(
    w: &Worldline,
    epochs: &[f64],
    max_step: f64,
    field: &PotentialField,
    cfg: &EphemerisConfig,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(epochs.len());
    let mut acc = 0.0;
    for (k, &t) in epochs.iter().enumerate() {
        if k > 0 {
            let prev = epochs[k - 1];
            acc += accumulate_proper_offset(w, prev, t, max_step.min(t - prev), field, cfg)?;
        }
        out.push(acc);
    }
    Ok(out)
}

/// Mean rate of `a` relative to `b` over `[t0, t1]`, as seconds gained per day.
pub fn differential_rate_per_day(
    a: &Worldline,
    b: &Worldline,
    t0: f64,
    t1: f64,
    step: f64,
    field: &PotentialField,
    cfg: &EphemerisConfig,
) -> Result<f64> {
    let da = accumulate_proper_offset(a, t0, t1, step, field, cfg)?;
    let db = accumulate_proper_offset(b, t0, t1, step, field, cfg)?;
    Ok((da - db) / (t1 - t0) * SECONDS_PER_DAY)
}
