//! Discrete controllers for the dilution rate.
//!
//! Two laws share the [`DiscreteController`] interface:
//!
//! * [`FlController`], input-output feedback linearization built on the
//!   simplified growth model, `D = (r̂_X(y) + λ (y - y_r)) / y`;
//! * [`IpController`], the intelligent proportional law
//!   `u = -(F - ẏ_r + K_P e) / a` where `F` is re-estimated every sample
//!   from a sliding window of applied controls and measurements.
//!
//! Both are called once per sampling instant and their output is held over
//! the following period.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetics::{growth_rate_simplified, SimplifiedModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActuatorBounds {
    /// 1/h.
    pub d_min: f64,
    /// 1/h.
    pub d_max: f64,
}

impl Default for ActuatorBounds {
    fn default() -> Self {
        Self {
            d_min: 0.0,
            d_max: 0.5,
        }
    }
}

impl ActuatorBounds {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_min >= 0.0 && self.d_min < self.d_max) {
            return Err(Error::Config(format!(
                "actuator bounds need 0 <= d_min < d_max, got [{}, {}]",
                self.d_min, self.d_max
            )));
        }
        Ok(())
    }
}

pub fn saturate(u_raw: f64, bounds: &ActuatorBounds) -> f64 {
    u_raw.max(bounds.d_min).min(bounds.d_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlConfig {
    /// Error-dynamics gain, 1/h.
    pub lambda: f64,
    /// Smallest biomass used as divisor, kg/m³.
    pub x_floor: f64,
    pub model: SimplifiedModelParams,
}

impl Default for FlConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            x_floor: 1e-4,
            model: SimplifiedModelParams::default(),
        }
    }
}

impl FlConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(Error::Config(format!(
                "lambda must be > 0, got {}",
                self.lambda
            )));
        }
        if !(self.x_floor > 0.0) {
            return Err(Error::Config(format!(
                "x_floor must be > 0, got {}",
                self.x_floor
            )));
        }
        self.model.validate()
    }
}

/// Unsaturated feedback-linearizing dilution rate.
pub fn fl_control(y_meas: f64, y_ref: f64, q0: f64, cfg: &FlConfig) -> Result<f64> {
    let r_hat = growth_rate_simplified(y_meas, q0, &cfg.model)?;
    Ok((r_hat + cfg.lambda * (y_meas - y_ref)) / y_meas.max(cfg.x_floor))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    /// Algebraic estimate from the measured output and applied control.
    OpenLoop,
    /// Estimate that assumes the iP error dynamics are already achieved.
    ClosedLoop,
}

/// What the iP law does before the estimation window is full.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WarmupMode {
    /// Use `F = 0`.
    ZeroEstimate,
    /// Apply `d_min`.
    HoldMin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IpConfig {
    /// Control gain of the ultra-local model, kg/m³.
    pub a: f64,
    /// Proportional gain, 1/h.
    pub k_p: f64,
    /// Estimation window length, h.
    pub tau: f64,
    pub estimator: EstimatorKind,
    pub warmup: WarmupMode,
}

impl Default for IpConfig {
    fn default() -> Self {
        Self {
            a: -0.2,
            k_p: 5.0,
            tau: 1.5,
            estimator: EstimatorKind::OpenLoop,
            warmup: WarmupMode::ZeroEstimate,
        }
    }
}

impl IpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.a == 0.0 || !self.a.is_finite() {
            return Err(Error::Config(format!(
                "iP gain a must be finite and nonzero, got {}",
                self.a
            )));
        }
        if !(self.k_p > 0.0) {
            return Err(Error::Config(format!("K_P must be > 0, got {}", self.k_p)));
        }
        if !(self.tau > 0.0) {
            return Err(Error::Config(format!("tau must be > 0, got {}", self.tau)));
        }
        Ok(())
    }
}

/// Unsaturated iP control.
pub fn ip_control(f_est: f64, y_ref_dot: f64, e: f64, cfg: &IpConfig) -> f64 {
    -(f_est - y_ref_dot + cfg.k_p * e) / cfg.a
}

/// One sampling instant as seen by the estimator. `u` is the control held
/// from `t` until the next sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSample {
    pub t: f64,
    pub y: f64,
    pub e: f64,
    pub y_ref_dot: f64,
    pub u: f64,
}

/// Sliding window of the last `intervals` sampling periods: `intervals + 1`
/// samples, oldest first. Only the controls of the first `intervals`
/// samples enter the integrals, so the newest sample may still lack one.
#[derive(Debug, Clone)]
pub struct EstimationWindow {
    intervals: usize,
    samples: VecDeque<WindowSample>,
}

impl EstimationWindow {
    pub fn new(intervals: usize) -> Result<Self> {
        if intervals == 0 {
            return Err(Error::Config(
                "estimation window needs at least one interval".into(),
            ));
        }
        Ok(Self {
            intervals,
            samples: VecDeque::with_capacity(intervals + 1),
        })
    }

    /// Window covering `tau` at sampling period `ts`.
    pub fn for_horizon(tau: f64, ts: f64) -> Result<Self> {
        let n = (tau / ts).round();
        if !(n >= 1.0) {
            return Err(Error::Config(format!(
                "estimation window tau = {tau} h is shorter than the sampling period {ts} h"
            )));
        }
        Self::new(n as usize)
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    /// Appends a measurement; its control is unknown until
    /// [`set_latest_control`](Self::set_latest_control).
    pub fn push_measurement(&mut self, t: f64, y: f64, e: f64, y_ref_dot: f64) {
        self.push(WindowSample {
            t,
            y,
            e,
            y_ref_dot,
            u: f64::NAN,
        });
    }

    pub fn push(&mut self, sample: WindowSample) {
        if self.samples.len() == self.intervals + 1 {
            self.samples.pop_front();
        }
        self.samples.push_back(sample);
    }

    pub fn set_latest_control(&mut self, u: f64) {
        if let Some(s) = self.samples.back_mut() {
            s.u = u;
        }
    }

    pub fn is_ready(&self) -> bool {
        self.samples.len() == self.intervals + 1
    }

    pub fn samples(&self) -> impl Iterator<Item = &WindowSample> {
        self.samples.iter()
    }

    /// Time covered by the buffered samples, h.
    pub fn span(&self) -> f64 {
        match (self.samples.front(), self.samples.back()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    fn intervals_iter(&self) -> impl Iterator<Item = (&WindowSample, &WindowSample)> {
        self.samples.iter().zip(self.samples.iter().skip(1))
    }
}

/// `F = -(6/τ³) ∫₀^τ [(τ - 2σ) y(σ) + a σ (τ - σ) u(σ)] dσ` over the window,
/// with `σ` measured from the window start. The output is interpolated
/// linearly between samples and the control is held, so each interval's
/// integrand is quadratic and a three-point Simpson rule integrates it exactly.
/// Returns `None` until the window is full.
pub fn estimate_f_open(window: &EstimationWindow, a: f64) -> Option<f64> {
    if !window.is_ready() {
        return None;
    }
    let tau = window.span();
    let t0 = window.samples.front()?.t;
    let kernel = |s: f64, y: f64, u: f64| (tau - 2.0 * s) * y + a * s * (tau - s) * u;
    let integral: f64 = window
        .intervals_iter()
        .map(|(lo, hi)| {
            let (s0, s1) = (lo.t - t0, hi.t - t0);
            let sm = 0.5 * (s0 + s1);
            let ym = 0.5 * (lo.y + hi.y);
            (s1 - s0) / 6.0
                * (kernel(s0, lo.y, lo.u) + 4.0 * kernel(sm, ym, lo.u) + kernel(s1, hi.y, lo.u))
        })
        .sum();
    Some(-6.0 / tau.powi(3) * integral)
}

/// `F = (1/τ) ∫ (ẏ_r - a u - K_P e) dσ` over the window: trapezoid for
/// `ẏ_r` and `e`, exact for the held control. Returns `None` until the
/// window is full.
pub fn estimate_f_closed(window: &EstimationWindow, a: f64, k_p: f64) -> Option<f64> {
    if !window.is_ready() {
        return None;
    }
    let tau = window.span();
    let integral: f64 = window
        .intervals_iter()
        .map(|(lo, hi)| {
            let h = hi.t - lo.t;
            h * (0.5 * (lo.y_ref_dot + hi.y_ref_dot) - a * lo.u - k_p * 0.5 * (lo.e + hi.e))
        })
        .sum();
    Some(integral / tau)
}

/// What a controller sees at a sampling instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub t: f64,
    pub y_meas: f64,
    pub y_ref: f64,
    pub y_ref_dot: f64,
    pub q0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlAction {
    /// Saturated dilution rate to hold over the next period, 1/h.
    pub d: f64,
    pub raw: f64,
    /// Estimate of `F` used by the iP law.
    pub f_est: Option<f64>,
}

pub trait DiscreteController {
    fn step(&mut self, obs: &Observation) -> Result<ControlAction>;
}

fn check_time(last: &mut Option<f64>, t: f64) -> Result<()> {
    if let Some(prev) = *last {
        if !(t > prev) {
            return Err(Error::Usage(format!(
                "controller called at t = {t} h after t = {prev} h; sample times must increase"
            )));
        }
    }
    *last = Some(t);
    Ok(())
}

#[derive(Debug, Clone)]
pub struct FlController {
    cfg: FlConfig,
    bounds: ActuatorBounds,
    last_t: Option<f64>,
}

impl FlController {
    pub fn new(cfg: FlConfig, bounds: ActuatorBounds) -> Result<Self> {
        cfg.validate()?;
        bounds.validate()?;
        Ok(Self {
            cfg,
            bounds,
            last_t: None,
        })
    }
}

impl DiscreteController for FlController {
    fn step(&mut self, obs: &Observation) -> Result<ControlAction> {
        check_time(&mut self.last_t, obs.t)?;
        let raw = fl_control(obs.y_meas, obs.y_ref, obs.q0, &self.cfg)?;
        Ok(ControlAction {
            d: saturate(raw, &self.bounds),
            raw,
            f_est: None,
        })
    }
}

#[derive(Debug, Clone)]
pub struct IpController {
    cfg: IpConfig,
    bounds: ActuatorBounds,
    window: EstimationWindow,
    last_t: Option<f64>,
}

impl IpController {
    pub fn new(cfg: IpConfig, bounds: ActuatorBounds, sampling_period: f64) -> Result<Self> {
        cfg.validate()?;
        bounds.validate()?;
        Ok(Self {
            window: EstimationWindow::for_horizon(cfg.tau, sampling_period)?,
            cfg,
            bounds,
            last_t: None,
        })
    }

    pub fn window(&self) -> &EstimationWindow {
        &self.window
    }

    fn estimate(&self) -> Option<f64> {
        match self.cfg.estimator {
            EstimatorKind::OpenLoop => estimate_f_open(&self.window, self.cfg.a),
            EstimatorKind::ClosedLoop => estimate_f_closed(&self.window, self.cfg.a, self.cfg.k_p),
        }
    }
}

impl DiscreteController for IpController {
    fn step(&mut self, obs: &Observation) -> Result<ControlAction> {
        check_time(&mut self.last_t, obs.t)?;
        let e = obs.y_meas - obs.y_ref;
        self.window
            .push_measurement(obs.t, obs.y_meas, e, obs.y_ref_dot);
        let f_est = match (self.estimate(), self.cfg.warmup) {
            (Some(f), _) => Some(f),
            (None, WarmupMode::ZeroEstimate) => Some(0.0),
            (None, WarmupMode::HoldMin) => None,
        };
        let (raw, d) = match f_est {
            Some(f) => {
                let raw = ip_control(f, obs.y_ref_dot, e, &self.cfg);
                (raw, saturate(raw, &self.bounds))
            }
            None => (self.bounds.d_min, self.bounds.d_min),
        };
        // the estimator must see what was actually applied
        self.window.set_latest_control(d);
        Ok(ControlAction { d, raw, f_est })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::GrowthKinetics;

    fn obs(t: f64, y: f64, y_ref: f64, q0: f64) -> Observation {
        Observation {
            t,
            y_meas: y,
            y_ref,
            y_ref_dot: 0.0,
            q0,
        }
    }

    #[test]
    fn saturation_examples() {
        let b = ActuatorBounds::default();
        assert_eq!(saturate(-12.5, &b), 0.0);
        assert_eq!(saturate(0.3, &b), 0.3);
        assert_eq!(saturate(0.7, &b), 0.5);
    }

    #[test]
    fn bounds_validation() {
        assert!(ActuatorBounds::default().validate().is_ok());
        assert!(ActuatorBounds {
            d_min: 0.5,
            d_max: 0.5
        }
        .validate()
        .is_err());
        assert!(ActuatorBounds {
            d_min: -0.1,
            d_max: 0.5
        }
        .validate()
        .is_err());
    }

    #[test]
    fn fl_at_setpoint_is_model_specific_growth() {
        let cfg = FlConfig::default();
        let d = fl_control(0.17, 0.17, 100.0, &cfg).unwrap();
        let mu_hat = cfg.model.specific_growth_rate(0.17, 100.0).unwrap();
        assert!((d - mu_hat).abs() < 1e-15);
        // direct evaluation of the mean irradiance and Haldane law
        assert!((d - 2.747_318_248_741_524e-2).abs() < 1e-14);
    }

    #[test]
    fn fl_below_setpoint_commands_negative_dilution() {
        let cfg = FlConfig::default();
        let raw = fl_control(0.17, 0.38, 600.0, &cfg).unwrap();
        assert!(raw < 0.0);
        assert_eq!(saturate(raw, &ActuatorBounds::default()), 0.0);
    }

    #[test]
    fn fl_guard_keeps_output_finite() {
        let cfg = FlConfig::default();
        let raw = fl_control(0.0, 0.2, 600.0, &cfg).unwrap();
        assert!(raw.is_finite());
        assert!((raw - (-0.2 / 1e-4)).abs() < 1e-9);
    }

    #[test]
    fn ip_arithmetic() {
        let cfg = IpConfig {
            a: 0.2,
            k_p: 5.0,
            ..IpConfig::default()
        };
        assert!((ip_control(2.0, 0.0, 0.1, &cfg) + 12.5).abs() < 1e-12);
        assert_eq!(ip_control(0.3, 0.3, 0.0, &cfg), 0.0);
    }

    fn linear_window(n: usize, tau: f64, y0: f64, slope: f64, u: f64) -> EstimationWindow {
        let mut w = EstimationWindow::new(n).unwrap();
        let h = tau / n as f64;
        for i in 0..=n {
            let s = i as f64 * h;
            w.push(WindowSample {
                t: 7.0 + s,
                y: y0 + slope * s,
                e: 0.0,
                y_ref_dot: 0.0,
                u,
            });
        }
        w
    }

    #[test]
    fn open_estimator_exact_on_linear_signal() {
        let (f, a, u0, tau) = (0.037, 0.2, 0.3, 1.5);
        let w = linear_window(64, tau, 0.21, f + a * u0, u0);
        let est = estimate_f_open(&w, a).unwrap();
        assert!((est - f).abs() < 1e-6);
        assert!((est - f).abs() < 1e-12);
    }

    #[test]
    fn open_estimator_degenerate_cases() {
        let w = linear_window(15, 1.5, 0.4, 0.0, 0.0);
        assert!(estimate_f_open(&w, -0.2).unwrap().abs() < 1e-14);
        let w = linear_window(15, 1.5, 0.0, 0.05, 0.9);
        assert!((estimate_f_open(&w, 0.0).unwrap() - 0.05).abs() < 1e-14);
    }

    #[test]
    fn closed_estimator_constant_integrand() {
        let mut w = EstimationWindow::new(15).unwrap();
        for i in 0..=15 {
            w.push(WindowSample {
                t: 0.1 * i as f64,
                y: 0.2,
                e: 0.02,
                y_ref_dot: 0.0,
                u: 0.0,
            });
        }
        let est = estimate_f_closed(&w, -0.2, 5.0).unwrap();
        assert!((est + 5.0 * 0.02).abs() < 1e-12);
    }

    #[test]
    fn estimators_wait_for_full_window() {
        let mut w = EstimationWindow::new(3).unwrap();
        for i in 0..3 {
            w.push_measurement(i as f64, 0.1, 0.0, 0.0);
            w.set_latest_control(0.0);
            assert!(estimate_f_open(&w, 0.2).is_none());
            assert!(estimate_f_closed(&w, 0.2, 5.0).is_none());
        }
        w.push_measurement(3.0, 0.1, 0.0, 0.0);
        assert!(estimate_f_open(&w, 0.2).is_some());
        assert_eq!(w.samples().count(), 4);
        w.push_measurement(4.0, 0.1, 0.0, 0.0);
        assert_eq!(w.samples().count(), 4);
        assert_eq!(w.span(), 3.0);
    }

    #[test]
    fn window_sizing() {
        assert_eq!(
            EstimationWindow::for_horizon(1.5, 0.1).unwrap().intervals(),
            15
        );
        assert!(EstimationWindow::for_horizon(0.01, 0.1).is_err());
    }

    #[test]
    fn ip_warmup_batches_below_setpoint() {
        let mut c = IpController::new(IpConfig::default(), ActuatorBounds::default(), 0.1).unwrap();
        let act = c.step(&obs(0.0, 0.17, 0.38, 600.0)).unwrap();
        assert_eq!(act.f_est, Some(0.0));
        // e < 0 and a < 0 give a negative raw command
        assert!((act.raw - (-5.0 * 0.21 / 0.2)).abs() < 1e-12);
        assert_eq!(act.d, 0.0);
    }

    #[test]
    fn ip_hold_min_warmup() {
        let cfg = IpConfig {
            warmup: WarmupMode::HoldMin,
            ..IpConfig::default()
        };
        let bounds = ActuatorBounds {
            d_min: 0.05,
            d_max: 0.5,
        };
        let mut c = IpController::new(cfg, bounds, 0.1).unwrap();
        for k in 0..15 {
            let act = c.step(&obs(0.1 * k as f64, 0.3, 0.2, 600.0)).unwrap();
            assert_eq!(act.d, 0.05);
            assert_eq!(act.f_est, None);
        }
        let act = c.step(&obs(1.5, 0.3, 0.2, 600.0)).unwrap();
        assert!(act.f_est.is_some());
    }

    #[test]
    fn ip_records_saturated_control() {
        let mut c = IpController::new(IpConfig::default(), ActuatorBounds::default(), 0.1).unwrap();
        // far above the setpoint: raw command beyond d_max
        let act = c.step(&obs(0.0, 0.5, 0.17, 100.0)).unwrap();
        assert!(act.raw > 0.5);
        assert_eq!(act.d, 0.5);
        assert_eq!(c.window().samples().last().unwrap().u, 0.5);
    }

    #[test]
    fn controllers_reject_non_increasing_time() {
        let mut fl = FlController::new(FlConfig::default(), ActuatorBounds::default()).unwrap();
        fl.step(&obs(1.0, 0.2, 0.2, 600.0)).unwrap();
        assert!(matches!(
            fl.step(&obs(1.0, 0.2, 0.2, 600.0)),
            Err(Error::Usage(_))
        ));
        let mut ip =
            IpController::new(IpConfig::default(), ActuatorBounds::default(), 0.1).unwrap();
        ip.step(&obs(1.0, 0.2, 0.2, 600.0)).unwrap();
        assert!(ip.step(&obs(0.9, 0.2, 0.2, 600.0)).is_err());
    }

    #[test]
    fn fl_step_at_setpoint() {
        let cfg = FlConfig::default();
        let mut c = FlController::new(cfg, ActuatorBounds::default()).unwrap();
        let act = c.step(&obs(0.0, 0.38, 0.38, 600.0)).unwrap();
        let mu_hat = cfg.model.specific_growth_rate(0.38, 600.0).unwrap();
        assert!((act.d - mu_hat.clamp(0.0, 0.5)).abs() < 1e-15);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = IpConfig {
            a: 0.0,
            ..IpConfig::default()
        };
        assert!(IpController::new(bad, ActuatorBounds::default(), 0.1).is_err());
        let bad = FlConfig {
            lambda: 0.0,
            ..FlConfig::default()
        };
        assert!(FlController::new(bad, ActuatorBounds::default()).is_err());
    }
}
