//! The true plant: biomass mass balance under a held dilution rate, the
//! incident-light schedule and the noisy turbidity measurement.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetics::GrowthKinetics;
use crate::numerics::rk4_step;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    /// Biomass concentration, kg/m³.
    pub x: f64,
    /// Time, h.
    pub t: f64,
}

/// Incident light `q0(t)` in µmol/m²/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LightProfile {
    /// `(t_start, q0)` pairs. A segment is active on `(t_start, next_start]`;
    /// the first segment also covers everything before its start.
    PiecewiseConstant { segments: Vec<(f64, f64)> },
    /// Half-sine day arc over `day_fraction` of each period on top of a
    /// constant night floor.
    DayNight {
        period: f64,
        floor: f64,
        peak: f64,
        day_fraction: f64,
    },
}

impl LightProfile {
    /// 600 µmol/m²/s up to t = 30 h, 100 afterwards.
    pub fn step_down() -> Self {
        LightProfile::PiecewiseConstant {
            segments: vec![(0.0, 600.0), (30.0, 100.0)],
        }
    }

    pub fn day_night() -> Self {
        LightProfile::DayNight {
            period: 24.0,
            floor: 100.0,
            peak: 600.0,
            day_fraction: 0.5,
        }
    }

    pub fn constant(q0: f64) -> Self {
        LightProfile::PiecewiseConstant {
            segments: vec![(0.0, q0)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LightProfile::PiecewiseConstant { segments } => {
                if segments.is_empty() {
                    return Err(Error::Config("light profile has no segments".into()));
                }
                for w in segments.windows(2) {
                    if !(w[1].0 > w[0].0) {
                        return Err(Error::Config(format!(
                            "light segment start times must strictly increase ({} then {})",
                            w[0].0, w[1].0
                        )));
                    }
                }
                if let Some(&(_, q)) = segments.iter().find(|s| !(s.1 > 0.0)) {
                    return Err(Error::Config(format!("light level must be > 0, got {q}")));
                }
            }
            LightProfile::DayNight {
                period,
                floor,
                peak,
                day_fraction,
            } => {
                if !(*period > 0.0) {
                    return Err(Error::Config(format!(
                        "day/night period must be > 0, got {period}"
                    )));
                }
                if !(*floor > 0.0) || !(peak >= floor) {
                    return Err(Error::Config(format!(
                        "day/night levels need 0 < floor <= peak, got floor {floor} peak {peak}"
                    )));
                }
                if !(*day_fraction > 0.0 && *day_fraction <= 1.0) {
                    return Err(Error::Config(format!(
                        "day fraction must lie in (0, 1], got {day_fraction}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn light_at(&self, t: f64) -> f64 {
        match self {
            LightProfile::PiecewiseConstant { segments } => segments
                .iter()
                .rev()
                .find(|(start, _)| *start < t)
                .or(segments.first())
                .map_or(0.0, |&(_, q)| q),
            LightProfile::DayNight {
                period,
                floor,
                peak,
                day_fraction,
            } => {
                let frac = t.rem_euclid(*period) / period;
                if frac < *day_fraction {
                    let arc = (std::f64::consts::PI * frac / day_fraction).sin().max(0.0);
                    floor + (peak - floor) * arc
                } else {
                    *floor
                }
            }
        }
    }

    /// Sample times in `(0, horizon]` at which a piecewise profile switches.
    pub fn switch_times(&self, horizon: f64) -> Vec<f64> {
        match self {
            LightProfile::PiecewiseConstant { segments } => segments
                .iter()
                .skip(1)
                .map(|s| s.0)
                .filter(|&t| t > 0.0 && t <= horizon)
                .collect(),
            LightProfile::DayNight { .. } => Vec::new(),
        }
    }
}

pub fn light_at(t: f64, profile: &LightProfile) -> f64 {
    profile.light_at(t)
}

/// Multiplicative Gaussian measurement noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub relative_std: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            relative_std: 0.01,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    /// Sampling period, h.
    pub period: f64,
    /// Runge-Kutta steps per sampling period.
    pub substeps: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            period: 0.1,
            substeps: 10,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.period > 0.0) {
            return Err(Error::Config(format!(
                "sampling period must be > 0, got {}",
                self.period
            )));
        }
        if self.substeps == 0 {
            return Err(Error::Config("integrator substeps must be >= 1".into()));
        }
        Ok(())
    }
}

/// Seeded turbidity sensor: `y = X (1 + nu)`, `nu ~ N(0, std²)`, clamped at 0.
#[derive(Debug, Clone)]
pub struct Sensor {
    relative_std: f64,
    rng: ChaCha8Rng,
}

impl Sensor {
    pub fn new(cfg: &NoiseConfig) -> Result<Self> {
        if !(cfg.relative_std >= 0.0) {
            return Err(Error::Config(format!(
                "noise std must be >= 0, got {}",
                cfg.relative_std
            )));
        }
        Ok(Self {
            relative_std: cfg.relative_std,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        })
    }

    pub fn measure(&mut self, x: f64) -> f64 {
        // Always draw, so the noise stream does not depend on the std.
        let nu: f64 = StandardNormal.sample(&mut self.rng);
        (x * (1.0 + self.relative_std * nu)).max(0.0)
    }
}

/// `dX/dt = r_X(X, q0) - D X`.
pub fn plant_derivative<K: GrowthKinetics + ?Sized>(
    x: f64,
    d: f64,
    q0: f64,
    kinetics: &K,
) -> Result<f64> {
    if !(d >= 0.0) {
        return Err(Error::domain("D", d, "dilution rate must be >= 0"));
    }
    Ok(kinetics.growth_rate(x, q0)? - d * x)
}

/// Advances the plant over `dt` with the dilution rate held constant
/// (zero-order hold), using `substeps` RK4 steps. Light is evaluated at the
/// stage times.
pub fn step<K: GrowthKinetics + ?Sized>(
    state: PlantState,
    d: f64,
    profile: &LightProfile,
    dt: f64,
    substeps: usize,
    kinetics: &K,
) -> Result<PlantState> {
    if !(dt > 0.0) {
        return Err(Error::Usage(format!("plant step needs dt > 0, got {dt}")));
    }
    if substeps == 0 {
        return Err(Error::Usage("plant step needs at least one substep".into()));
    }
    let h = dt / substeps as f64;
    let mut x = state.x;
    for i in 0..substeps {
        let t = state.t + i as f64 * h;
        let rhs = |t: f64, x: f64| plant_derivative(x.max(0.0), d, profile.light_at(t), kinetics);
        x = rk4_step(rhs, t, x, h).map_err(|e| Error::Integration {
            t,
            x,
            detail: e.to_string(),
        })?;
        if !x.is_finite() {
            return Err(Error::Integration {
                t: t + h,
                x,
                detail: "non-finite biomass".into(),
            });
        }
        x = x.max(0.0);
    }
    Ok(PlantState { x, t: state.t + dt })
}
