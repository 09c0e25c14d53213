//! Equilibria of the biomass balance and productivity-maximizing setpoints.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetics::{FullModelParams, GrowthKinetics};
use crate::numerics::golden_section_max;

/// Range of incident light over which setpoints are computed, µmol/m²/s.
pub const VALID_LIGHT: (f64, f64) = (100.0, 1000.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    /// kg/m³.
    pub x_star: f64,
    /// 1/h.
    pub d_star: f64,
    /// kg/m³/h.
    pub productivity: f64,
    pub q0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub grid_points: usize,
    /// Width of the final golden-section bracket, kg/m³.
    pub tolerance: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            x_min: 0.01,
            x_max: 2.0,
            grid_points: 200,
            tolerance: 1e-5,
        }
    }
}

/// Dilution rate that makes `x` an equilibrium at light `q0`. Negative
/// values mean no admissible equilibrium exists at that biomass.
pub fn equilibrium_dilution(x: f64, q0: f64, p: &FullModelParams) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::domain("X", x, "equilibrium dilution needs X > 0"));
    }
    p.specific_growth_rate(x, q0)
}

/// Steady-state productivity `D* X = r_X(X)`.
pub fn productivity(x: f64, q0: f64, p: &FullModelParams) -> Result<f64> {
    p.growth_rate(x, q0)
}

/// Counts direction changes of a sampled sequence, ignoring exact ties.
pub(crate) fn direction_changes(values: &[f64]) -> usize {
    let mut turns = 0;
    let mut last: Option<bool> = None;
    for w in values.windows(2) {
        if w[1] == w[0] {
            continue;
        }
        let rising = w[1] > w[0];
        if last.is_some_and(|r| r != rising) {
            turns += 1;
        }
        last = Some(rising);
    }
    turns
}

/// Index of the largest value; the first (smallest X) wins ties.
pub(crate) fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Productivity-maximizing operating point at constant light `q0`: grid
/// search over `[x_min, x_max]` followed by golden-section refinement
/// around the best node.
pub fn optimal_setpoint(
    q0: f64,
    p: &FullModelParams,
    cfg: &SearchConfig,
) -> Result<OperatingPoint> {
    if !(VALID_LIGHT.0..=VALID_LIGHT.1).contains(&q0) {
        return Err(Error::domain(
            "q0",
            q0,
            "setpoints are defined for 100 <= q0 <= 1000",
        ));
    }
    if cfg.grid_points < 3 || !(cfg.x_min > 0.0 && cfg.x_max > cfg.x_min) {
        return Err(Error::Config(format!(
            "setpoint search needs >= 3 grid points on 0 < x_min < x_max, got {} on [{}, {}]",
            cfg.grid_points, cfg.x_min, cfg.x_max
        )));
    }
    let step = (cfg.x_max - cfg.x_min) / (cfg.grid_points - 1) as f64;
    let xs: Vec<f64> = (0..cfg.grid_points)
        .map(|i| cfg.x_min + i as f64 * step)
        .collect();
    let values = xs
        .iter()
        .map(|&x| productivity(x, q0, p))
        .collect::<Result<Vec<_>>>()?;
    let turns = direction_changes(&values);
    if turns > 1 {
        return Err(Error::NotUnimodal { q0, turns });
    }
    let best = argmax_first(&values);
    if !(values[best] > 0.0) {
        return Err(Error::NoAdmissibleSetpoint { q0 });
    }
    let lo = xs[best.saturating_sub(1)];
    let hi = xs[(best + 1).min(xs.len() - 1)];
    let x_star = golden_section_max(|x| productivity(x, q0, p), lo, hi, cfg.tolerance)?;
    let d_star = equilibrium_dilution(x_star, q0, p)?;
    Ok(OperatingPoint {
        x_star,
        d_star,
        productivity: d_star * x_star,
        q0,
    })
}

/// Setpoint table over a light grid.
pub fn setpoint_map(
    q0_grid: &[f64],
    p: &FullModelParams,
    cfg: &SearchConfig,
) -> Result<Vec<OperatingPoint>> {
    let table = q0_grid
        .iter()
        .map(|&q0| optimal_setpoint(q0, p, cfg))
        .collect::<Result<Vec<_>>>()?;
    for w in table.windows(2) {
        if w[1].q0 > w[0].q0 && (w[1].x_star < w[0].x_star || w[1].productivity < w[0].productivity)
        {
            log::warn!(
                "setpoint map is not monotone between q0 = {} and q0 = {}",
                w[0].q0,
                w[1].q0
            );
        }
    }
    Ok(table)
}

/// `n` equally spaced light levels from `min` to `max` inclusive.
pub fn light_grid(min: f64, max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![min],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    max
                } else {
                    min + (max - min) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}
