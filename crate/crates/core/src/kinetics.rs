//! Growth kinetics. The full model derives the growth rate from the
//! depth-averaged specific oxygen production rate; the simplified model is
//! a Haldane law in the mean irradiance and is what the model-based
//! controller believes the plant to be.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{check_simpson_nodes, simpson};
use crate::radiative::{mean_irradiance_simplified, plant_profile, Geometry, OpticalCorrelation};

/// The oxygen rate constants are per second; biomass dynamics run in hours.
pub const SECONDS_PER_HOUR: f64 = 3600.0;

/// Constants of the full (plant) model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FullModelParams {
    /// Half saturation constant of photosynthesis, µmol/m²/s.
    pub k: f64,
    /// Respiration inhibition constant, µmol/m²/s.
    pub k_r: f64,
    /// Maximum energetic yield.
    pub rho_m: f64,
    /// Quantum yield, mol/µmol.
    pub phi_prime: f64,
    /// Composite respiration term J_NADH2 / nu_NADH2-O2.
    pub j_ratio: f64,
    /// Oxygen-to-biomass stoichiometric coefficient.
    pub nu_o2_x: f64,
    /// C-molar mass of biomass, kg/C-mol.
    pub m_x: f64,
    pub optics: OpticalCorrelation,
    pub geometry: Geometry,
    /// Simpson nodes across the culture depth (odd, >= 3).
    pub quadrature_nodes: usize,
}

impl Default for FullModelParams {
    fn default() -> Self {
        Self {
            k: 120.0,
            k_r: 6.0,
            rho_m: 0.8,
            phi_prime: 1.12e-7,
            j_ratio: 3.19e-4,
            nu_o2_x: 1.183,
            m_x: 24e-3,
            optics: OpticalCorrelation::default(),
            geometry: Geometry::default(),
            quadrature_nodes: 401,
        }
    }
}

impl FullModelParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("k", self.k),
            ("k_r", self.k_r),
            ("rho_m", self.rho_m),
            ("phi_prime", self.phi_prime),
            ("j_ratio", self.j_ratio),
            ("nu_o2_x", self.nu_o2_x),
            ("m_x", self.m_x),
            ("geometry.depth", self.geometry.depth),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!(
                    "plant parameter {name} must be > 0, got {v}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.optics.backscatter) {
            return Err(Error::Config(format!(
                "backscatter fraction must lie in [0, 1], got {}",
                self.optics.backscatter
            )));
        }
        check_simpson_nodes(self.quadrature_nodes)
    }
}

/// Constants of the simplified (controller) model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimplifiedModelParams {
    /// Maximal specific growth rate parameter, 1/h.
    pub mu0: f64,
    /// Respiration rate, 1/h.
    pub mu_r: f64,
    pub alpha_hat: f64,
    /// Mass absorption coefficient, m²/kg.
    pub ea_hat: f64,
    /// Limitation constant, µmol/m²/s.
    pub k_i: f64,
    /// Inhibition constant, µmol/m²/s.
    pub k_ii: f64,
    pub geometry: Geometry,
}

impl Default for SimplifiedModelParams {
    fn default() -> Self {
        Self {
            mu0: 0.14,
            mu_r: 0.013,
            alpha_hat: 0.71,
            ea_hat: 151.0,
            k_i: 120.0,
            k_ii: 500.0,
            geometry: Geometry::default(),
        }
    }
}

impl SimplifiedModelParams {
    /// Attenuation per unit biomass and depth, `(1 + a) / (2 a) * E_a`.
    pub fn attenuation(&self) -> f64 {
        (1.0 + self.alpha_hat) / (2.0 * self.alpha_hat) * self.ea_hat
    }

    /// Light response `mu0 * G / (K_I + G + G² / K_II)`, 1/h.
    pub fn haldane(&self, mean_irradiance: f64) -> f64 {
        let g = mean_irradiance;
        self.mu0 * g / (self.k_i + g + g * g / self.k_ii)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mu0", self.mu0),
            ("mu_r", self.mu_r),
            ("alpha_hat", self.alpha_hat),
            ("ea_hat", self.ea_hat),
            ("k_i", self.k_i),
            ("k_ii", self.k_ii),
            ("geometry.depth", self.geometry.depth),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!(
                    "simplified-model parameter {name} must be > 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Local specific oxygen rate for irradiance `g` and the absorption
/// coefficient acclimated to the current incident light. Units follow the
/// rate constants (per second).
pub fn local_oxygen_rate(g: f64, absorption: f64, p: &FullModelParams) -> f64 {
    let photosynthesis = p.rho_m * p.k / (p.k + g) * p.phi_prime * absorption * g;
    let respiration = p.j_ratio * p.k_r / (p.k_r + g);
    photosynthesis - respiration
}

/// Depth average of the local oxygen rate by composite Simpson quadrature.
pub fn mean_oxygen_rate(x: f64, q0: f64, p: &FullModelParams, n_nodes: usize) -> Result<f64> {
    check_simpson_nodes(n_nodes)?;
    if !(q0 >= 0.0) {
        return Err(Error::domain("q0", q0, "incident light must be >= 0"));
    }
    let (profile, props) = plant_profile(x, q0, &p.optics, &p.geometry)?;
    let Some(props) = props else {
        return Ok(local_oxygen_rate(0.0, 0.0, p));
    };
    if x == 0.0 {
        return Ok(local_oxygen_rate(q0, props.absorption, p));
    }
    let depth = profile.depth();
    let integral = simpson(
        |z| local_oxygen_rate(profile.at(z), props.absorption, p),
        0.0,
        depth,
        n_nodes,
    )?;
    Ok(integral / depth)
}

/// Volumetric growth rate of the full model, kg/m³/h.
pub fn growth_rate_full(x: f64, q0: f64, p: &FullModelParams) -> Result<f64> {
    let j = mean_oxygen_rate(x, q0, p, p.quadrature_nodes)?;
    Ok(j * SECONDS_PER_HOUR * p.m_x * x / p.nu_o2_x)
}

/// Volumetric growth rate of the simplified model, kg/m³/h.
pub fn growth_rate_simplified(x: f64, q0: f64, sp: &SimplifiedModelParams) -> Result<f64> {
    let g = mean_irradiance_simplified(x, q0, sp)?;
    Ok((sp.haldane(g) - sp.mu_r) * x)
}

/// A growth law `r_X(X, q0)`.
pub trait GrowthKinetics {
    fn growth_rate(&self, x: f64, q0: f64) -> Result<f64>;

    /// `r_X / X`, 1/h.
    fn specific_growth_rate(&self, x: f64, q0: f64) -> Result<f64> {
        check_positive_biomass(x)?;
        Ok(self.growth_rate(x, q0)? / x)
    }
}

fn check_positive_biomass(x: f64) -> Result<()> {
    if !(x > 0.0) {
        return Err(Error::domain("X", x, "specific growth rate needs X > 0"));
    }
    Ok(())
}

impl GrowthKinetics for FullModelParams {
    fn growth_rate(&self, x: f64, q0: f64) -> Result<f64> {
        growth_rate_full(x, q0, self)
    }

    fn specific_growth_rate(&self, x: f64, q0: f64) -> Result<f64> {
        check_positive_biomass(x)?;
        let j = mean_oxygen_rate(x, q0, self, self.quadrature_nodes)?;
        Ok(j * SECONDS_PER_HOUR * self.m_x / self.nu_o2_x)
    }
}

impl GrowthKinetics for SimplifiedModelParams {
    fn growth_rate(&self, x: f64, q0: f64) -> Result<f64> {
        growth_rate_simplified(x, q0, self)
    }

    fn specific_growth_rate(&self, x: f64, q0: f64) -> Result<f64> {
        check_positive_biomass(x)?;
        let g = mean_irradiance_simplified(x, q0, self)?;
        Ok(self.haldane(g) - self.mu_r)
    }
}

/// Which growth law a computation should use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GrowthModel {
    Full(FullModelParams),
    Simplified(SimplifiedModelParams),
}

impl GrowthKinetics for GrowthModel {
    fn growth_rate(&self, x: f64, q0: f64) -> Result<f64> {
        match self {
            GrowthModel::Full(p) => p.growth_rate(x, q0),
            GrowthModel::Simplified(p) => p.growth_rate(x, q0),
        }
    }

    fn specific_growth_rate(&self, x: f64, q0: f64) -> Result<f64> {
        match self {
            GrowthModel::Full(p) => p.specific_growth_rate(x, q0),
            GrowthModel::Simplified(p) => p.specific_growth_rate(x, q0),
        }
    }
}

pub fn specific_growth_rate(x: f64, q0: f64, model: &GrowthModel) -> Result<f64> {
    model.specific_growth_rate(x, q0)
}
