//! Small numerical kernels shared by the model modules: composite Simpson
//! quadrature, a classical Runge-Kutta step and golden-section maximization.

use crate::error::{Error, Result};

/// Composite Simpson rule over `[a, b]` using `n_nodes` equally spaced
/// nodes (endpoints included). `n_nodes` must be odd and at least 3.
pub fn simpson<F>(f: F, a: f64, b: f64, n_nodes: usize) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    check_simpson_nodes(n_nodes)?;
    let intervals = n_nodes - 1;
    let h = (b - a) / intervals as f64;
    let mut odd = 0.0;
    let mut even = 0.0;
    for i in 1..intervals {
        let v = f(a + i as f64 * h);
        if i % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    Ok(h / 3.0 * (f(a) + 4.0 * odd + 2.0 * even + f(b)))
}

pub(crate) fn check_simpson_nodes(n_nodes: usize) -> Result<()> {
    if n_nodes < 3 || n_nodes.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "Simpson quadrature needs an odd node count >= 3, got {n_nodes}"
        )));
    }
    Ok(())
}

/// One classical fourth-order Runge-Kutta step of `dx/dt = f(t, x)`.
pub fn rk4_step<F>(f: F, t: f64, x: f64, h: f64) -> Result<f64>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    let k1 = f(t, x)?;
    let k2 = f(t + 0.5 * h, x + 0.5 * h * k1)?;
    let k3 = f(t + 0.5 * h, x + 0.5 * h * k2)?;
    let k4 = f(t + h, x + h * k3)?;
    Ok(x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
/// Stops once the bracket is narrower than `tol` and returns its midpoint.
pub fn golden_section_max<F>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(hi > lo) || !(tol > 0.0) {
        return Err(Error::Config(format!(
            "golden-section bracket [{lo}, {hi}] with tolerance {tol} is invalid"
        )));
    }
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2)?;
        }
    }
    Ok(0.5 * (lo + hi))
}
