//! Light inside the culture: light-dependent optical properties, the
//! two-flux irradiance profile of a rectangular reactor and the mean
//! irradiance used by the simplified growth model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetics::SimplifiedModelParams;

/// Below this optical thickness the two-flux profile is replaced by its
/// transparent-culture limit `G = q0`.
const TRANSPARENT_LIMIT: f64 = 1e-12;

/// Mass optical coefficients of the biomass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalProps {
    /// Mass absorption coefficient, m²/kg.
    pub absorption: f64,
    /// Mass scattering coefficient, m²/kg.
    pub scattering: f64,
    /// Backward scattering fraction.
    pub backscatter: f64,
}

/// Empirical dependence of the optical coefficients on incident light:
/// `E = slope * ln(q0) + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticalCorrelation {
    pub absorption_slope: f64,
    pub absorption_intercept: f64,
    pub scattering_slope: f64,
    pub scattering_intercept: f64,
    pub backscatter: f64,
}

impl Default for OpticalCorrelation {
    fn default() -> Self {
        Self {
            absorption_slope: -28.0,
            absorption_intercept: 337.0,
            scattering_slope: 28.9,
            scattering_intercept: 708.0,
            backscatter: 0.08,
        }
    }
}

impl OpticalCorrelation {
    /// Optical properties acclimated to the incident light `q0` (µmol/m²/s).
    pub fn at(&self, q0: f64) -> Result<OpticalProps> {
        if !(q0 > 0.0) {
            return Err(Error::domain("q0", q0, "optical correlations need q0 > 0"));
        }
        let ln_q0 = q0.ln();
        let absorption = self.absorption_slope * ln_q0 + self.absorption_intercept;
        let scattering = self.scattering_slope * ln_q0 + self.scattering_intercept;
        if !(absorption > 0.0) {
            return Err(Error::domain(
                "q0",
                q0,
                "absorption correlation is non-positive, light level outside its validity",
            ));
        }
        if !(scattering > 0.0) {
            return Err(Error::domain(
                "q0",
                q0,
                "scattering correlation is non-positive, light level outside its validity",
            ));
        }
        Ok(OpticalProps {
            absorption,
            scattering,
            backscatter: self.backscatter,
        })
    }
}

/// Optical properties from the default correlations.
pub fn optical_coefficients(q0: f64) -> Result<OpticalProps> {
    OpticalCorrelation::default().at(q0)
}

/// Extinction coefficient and linear scattering modulus of the two-flux
/// approximation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoFluxCoeffs {
    /// 1/m.
    pub extinction: f64,
    pub scattering_modulus: f64,
}

pub fn two_flux_coeffs(x: f64, props: &OpticalProps) -> Result<TwoFluxCoeffs> {
    if !(x >= 0.0) {
        return Err(Error::domain("X", x, "biomass concentration must be >= 0"));
    }
    let ea = props.absorption;
    let total = ea + 2.0 * props.backscatter * props.scattering;
    Ok(TwoFluxCoeffs {
        extinction: x * (ea * total).sqrt(),
        scattering_modulus: (ea / total).sqrt(),
    })
}

/// Reactor geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    /// Culture depth, m.
    pub depth: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self { depth: 0.05 }
    }
}

/// Irradiance profile for fixed biomass and incident light. Built once and
/// then sampled at many depths, e.g. inside a quadrature.
#[derive(Debug, Clone, Copy)]
pub struct IrradianceProfile {
    q0: f64,
    depth: f64,
    coeffs: Option<TwoFluxCoeffs>,
    denom: f64,
}

impl IrradianceProfile {
    pub fn new(x: f64, q0: f64, props: &OpticalProps, geom: &Geometry) -> Result<Self> {
        if !(q0 >= 0.0) {
            return Err(Error::domain("q0", q0, "incident light must be >= 0"));
        }
        let coeffs = two_flux_coeffs(x, props)?;
        let dl = coeffs.extinction * geom.depth;
        let (coeffs, denom) = if q0 == 0.0 || dl < TRANSPARENT_LIMIT {
            (None, 1.0)
        } else {
            let a = coeffs.scattering_modulus;
            // Numerator and denominator are both scaled by exp(-dL).
            let denom = (1.0 + a).powi(2) - (1.0 - a).powi(2) * (-2.0 * dl).exp();
            (Some(coeffs), denom)
        };
        Ok(Self {
            q0,
            depth: geom.depth,
            coeffs,
            denom,
        })
    }

    /// Profile that needs no optical properties: dark or transparent.
    fn uniform(q0: f64, geom: &Geometry) -> Self {
        Self {
            q0,
            depth: geom.depth,
            coeffs: None,
            denom: 1.0,
        }
    }

    pub fn depth(&self) -> f64 {
        self.depth
    }

    /// Local irradiance at depth `z`; `z` is assumed to lie in `[0, L]`.
    pub fn at(&self, z: f64) -> f64 {
        match self.coeffs {
            None => self.q0,
            Some(TwoFluxCoeffs {
                extinction: d,
                scattering_modulus: a,
            }) => {
                let num =
                    (1.0 + a) * (-d * z).exp() - (1.0 - a) * (-d * (2.0 * self.depth - z)).exp();
                2.0 * self.q0 * num / self.denom
            }
        }
    }
}

/// Builds the profile for the plant, with optics looked up from `q0`.
/// In the dark the optics are never evaluated (the correlations are
/// undefined at `q0 = 0`).
pub(crate) fn plant_profile(
    x: f64,
    q0: f64,
    optics: &OpticalCorrelation,
    geom: &Geometry,
) -> Result<(IrradianceProfile, Option<OpticalProps>)> {
    if !(x >= 0.0) {
        return Err(Error::domain("X", x, "biomass concentration must be >= 0"));
    }
    if q0 == 0.0 {
        return Ok((IrradianceProfile::uniform(0.0, geom), None));
    }
    let props = optics.at(q0)?;
    Ok((IrradianceProfile::new(x, q0, &props, geom)?, Some(props)))
}

/// Local irradiance `G(z)` for biomass `x` under incident light `q0`.
pub fn irradiance_at_depth(
    z: f64,
    x: f64,
    q0: f64,
    optics: &OpticalCorrelation,
    geom: &Geometry,
) -> Result<f64> {
    if !(0.0..=geom.depth).contains(&z) {
        return Err(Error::domain("z", z, "depth must lie in [0, L]"));
    }
    let (profile, _) = plant_profile(x, q0, optics, geom)?;
    Ok(profile.at(z))
}

/// Depth-averaged irradiance of the simplified model (pure exponential
/// attenuation), in closed form.
pub fn mean_irradiance_simplified(x: f64, q0: f64, sp: &SimplifiedModelParams) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::domain("X", x, "biomass concentration must be >= 0"));
    }
    if !(q0 >= 0.0) {
        return Err(Error::domain("q0", q0, "incident light must be >= 0"));
    }
    let u = sp.attenuation() * x * sp.geometry.depth;
    if u < TRANSPARENT_LIMIT {
        return Ok(q0);
    }
    Ok(q0 * -(-u).exp_m1() / u)
}
