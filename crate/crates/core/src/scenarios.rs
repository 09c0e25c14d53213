//! Scenario definitions, closed-loop runs, robustness sweeps and tracking
//! metrics.

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{
    ActuatorBounds, DiscreteController, FlConfig, FlController, IpConfig, IpController, Observation,
};
use crate::error::{Error, Result};
use crate::kinetics::{FullModelParams, GrowthModel, SimplifiedModelParams};
use crate::plant::{self, LightProfile, NoiseConfig, PlantState, SamplingConfig, Sensor};
use crate::steady_state::{light_grid, optimal_setpoint, SearchConfig, VALID_LIGHT};

/// Names of the built-in scenarios.
pub const BUILTIN_SCENARIOS: [&str; 2] = ["paper-4.1", "paper-4.2"];

/// Settling band, relative to the setpoint.
pub const SETTLE_BAND: f64 = 0.02;

/// Length of the trailing window used for the steady-state offset, h.
pub const OFFSET_WINDOW: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerKind {
    Fl,
    Ip,
}

impl ControllerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ControllerKind::Fl => "fl",
            ControllerKind::Ip => "ip",
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fl" => Ok(ControllerKind::Fl),
            "ip" => Ok(ControllerKind::Ip),
            other => Err(Error::Config(format!(
                "unknown controller '{other}' (expected fl or ip)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlGains {
    pub lambda: f64,
    pub x_floor: f64,
}

impl Default for FlGains {
    fn default() -> Self {
        let d = FlConfig::default();
        Self {
            lambda: d.lambda,
            x_floor: d.x_floor,
        }
    }
}

/// Both controller tunings plus the model the FL law is built on; `kind`
/// selects which law runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerSettings {
    pub kind: ControllerKind,
    pub fl: FlGains,
    pub ip: IpConfig,
    /// Simplified growth model used by the model-based law.
    pub model: SimplifiedModelParams,
}

impl Default for ControllerSettings {
    fn default() -> Self {
        Self {
            kind: ControllerKind::Ip,
            fl: FlGains::default(),
            ip: IpConfig::default(),
            model: SimplifiedModelParams::default(),
        }
    }
}

impl ControllerSettings {
    pub fn fl_config(&self) -> FlConfig {
        FlConfig {
            lambda: self.fl.lambda,
            x_floor: self.fl.x_floor,
            model: self.model,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlantKind {
    Full,
    Simplified,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantSettings {
    pub kind: PlantKind,
    pub full: FullModelParams,
    pub simplified: SimplifiedModelParams,
}

impl Default for PlantSettings {
    fn default() -> Self {
        Self {
            kind: PlantKind::Full,
            full: FullModelParams::default(),
            simplified: SimplifiedModelParams::default(),
        }
    }
}

impl PlantSettings {
    pub fn model(&self) -> GrowthModel {
        match self.kind {
            PlantKind::Full => GrowthModel::Full(self.full),
            PlantKind::Simplified => GrowthModel::Simplified(self.simplified),
        }
    }
}

/// Biomass reference `y_r(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ReferenceSpec {
    Fixed {
        value: f64,
    },
    /// Same segment semantics as [`LightProfile::PiecewiseConstant`].
    Piecewise {
        segments: Vec<(f64, f64)>,
    },
    /// Productivity-optimal setpoint at the current light. With
    /// `table_step` set, setpoints come from a precomputed table over
    /// `[100, 1000]` with that spacing (linear interpolation).
    SetpointMap {
        #[serde(default)]
        search: SearchConfig,
        #[serde(default)]
        table_step: Option<f64>,
    },
}

impl ReferenceSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ReferenceSpec::Fixed { value } => {
                if !(*value > 0.0) {
                    return Err(Error::Config(format!("reference must be > 0, got {value}")));
                }
            }
            ReferenceSpec::Piecewise { segments } => {
                LightProfile::PiecewiseConstant {
                    segments: segments.clone(),
                }
                .validate()?;
            }
            ReferenceSpec::SetpointMap { table_step, .. } => {
                if let Some(step) = table_step {
                    if !(*step > 0.0) {
                        return Err(Error::Config(format!(
                            "setpoint table step must be > 0, got {step}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Evaluates a [`ReferenceSpec`] during a run.
enum Reference {
    Fixed(f64),
    Piecewise(LightProfile),
    Live {
        plant: FullModelParams,
        search: SearchConfig,
        memo: HashMap<u64, f64>,
    },
    Table(Vec<(f64, f64)>),
}

impl Reference {
    fn new(spec: &ReferenceSpec, plant: &FullModelParams) -> Result<Self> {
        Ok(match spec {
            ReferenceSpec::Fixed { value } => Reference::Fixed(*value),
            ReferenceSpec::Piecewise { segments } => {
                Reference::Piecewise(LightProfile::PiecewiseConstant {
                    segments: segments.clone(),
                })
            }
            ReferenceSpec::SetpointMap {
                search,
                table_step: None,
            } => Reference::Live {
                plant: *plant,
                search: *search,
                memo: HashMap::new(),
            },
            ReferenceSpec::SetpointMap {
                search,
                table_step: Some(step),
            } => {
                let n = ((VALID_LIGHT.1 - VALID_LIGHT.0) / step).ceil() as usize + 1;
                let table = light_grid(VALID_LIGHT.0, VALID_LIGHT.1, n)
                    .into_iter()
                    .map(|q0| optimal_setpoint(q0, plant, search).map(|op| (q0, op.x_star)))
                    .collect::<Result<Vec<_>>>()?;
                Reference::Table(table)
            }
        })
    }

    fn at(&mut self, t: f64, q0: f64) -> Result<f64> {
        match self {
            Reference::Fixed(v) => Ok(*v),
            Reference::Piecewise(p) => Ok(p.light_at(t)),
            Reference::Live {
                plant,
                search,
                memo,
            } => {
                if let Some(v) = memo.get(&q0.to_bits()) {
                    return Ok(*v);
                }
                let v = optimal_setpoint(q0, plant, search)?.x_star;
                memo.insert(q0.to_bits(), v);
                Ok(v)
            }
            Reference::Table(table) => {
                if !(VALID_LIGHT.0..=VALID_LIGHT.1).contains(&q0) {
                    return Err(Error::domain(
                        "q0",
                        q0,
                        "setpoint table covers 100 <= q0 <= 1000",
                    ));
                }
                let i = table
                    .partition_point(|&(q, _)| q <= q0)
                    .clamp(1, table.len() - 1);
                let ((q_lo, x_lo), (q_hi, x_hi)) = (table[i - 1], table[i]);
                Ok(x_lo + (x_hi - x_lo) * (q0 - q_lo) / (q_hi - q_lo))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// h.
    pub duration: f64,
    /// Initial biomass, kg/m³.
    pub x0: f64,
    pub light: LightProfile,
    pub reference: ReferenceSpec,
    #[serde(default)]
    pub controller: ControllerSettings,
    #[serde(default)]
    pub plant: PlantSettings,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub bounds: ActuatorBounds,
}

impl Scenario {
    /// Light step 600 -> 100 at t = 30 h with the reference stepping from
    /// 0.38 to 0.17 kg/m³, starting from 0.17 kg/m³, 50 h.
    pub fn setpoint_change() -> Self {
        Scenario {
            name: "paper-4.1".into(),
            duration: 50.0,
            x0: 0.17,
            light: LightProfile::step_down(),
            reference: ReferenceSpec::Piecewise {
                segments: vec![(0.0, 0.38), (30.0, 0.17)],
            },
            controller: ControllerSettings::default(),
            plant: PlantSettings::default(),
            sampling: SamplingConfig::default(),
            noise: NoiseConfig::default(),
            bounds: ActuatorBounds::default(),
        }
    }

    /// Constant 0.175 kg/m³ reference under a day/night light cycle.
    pub fn light_disturbance() -> Self {
        Scenario {
            name: "paper-4.2".into(),
            light: LightProfile::day_night(),
            reference: ReferenceSpec::Fixed { value: 0.175 },
            ..Self::setpoint_change()
        }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "paper-4.1" => Some(Self::setpoint_change()),
            "paper-4.2" => Some(Self::light_disturbance()),
            _ => None,
        }
    }

    pub fn with_controller(mut self, kind: ControllerKind) -> Self {
        self.controller.kind = kind;
        self
    }

    /// Number of sampling periods in the run.
    pub fn periods(&self) -> Result<usize> {
        let n = self.duration / self.sampling.period;
        let rounded = n.round();
        if (n - rounded).abs() > 1e-9 * n.max(1.0) {
            return Err(Error::Config(format!(
                "duration {} h is not a whole number of sampling periods ({} h)",
                self.duration, self.sampling.period
            )));
        }
        Ok(rounded as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) {
            return Err(Error::Config(format!(
                "duration must be > 0, got {}",
                self.duration
            )));
        }
        if !(self.x0 > 0.0) {
            return Err(Error::Config(format!(
                "initial biomass must be > 0, got {}",
                self.x0
            )));
        }
        self.sampling.validate()?;
        self.periods()?;
        self.light.validate()?;
        self.reference.validate()?;
        self.bounds.validate()?;
        if !(self.noise.relative_std >= 0.0) {
            return Err(Error::Config(format!(
                "noise std must be >= 0, got {}",
                self.noise.relative_std
            )));
        }
        self.plant.full.validate()?;
        self.plant.simplified.validate()?;
        match self.controller.kind {
            ControllerKind::Fl => self.controller.fl_config().validate()?,
            ControllerKind::Ip => {
                self.controller.ip.validate()?;
                if self.controller.ip.tau < self.sampling.period * 0.5 {
                    return Err(Error::Config(format!(
                        "tau = {} h is shorter than the sampling period",
                        self.controller.ip.tau
                    )));
                }
            }
        }
        Ok(())
    }

    fn build_controller(&self) -> Result<Box<dyn DiscreteController + Send>> {
        Ok(match self.controller.kind {
            ControllerKind::Fl => {
                Box::new(FlController::new(self.controller.fl_config(), self.bounds)?)
            }
            ControllerKind::Ip => Box::new(IpController::new(
                self.controller.ip,
                self.bounds,
                self.sampling.period,
            )?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub x_true: f64,
    pub y_meas: f64,
    pub y_ref: f64,
    pub d_applied: f64,
    pub q0: f64,
    pub f_est: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimulationTrace {
    pub records: Vec<TraceRecord>,
}

impl SimulationTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.t)
    }

    pub fn final_state(&self) -> Option<&TraceRecord> {
        self.records.last()
    }
}

/// Closed-loop run: at every sampling instant measure, compute the control,
/// record, then hold it while integrating the plant to the next instant.
pub fn run_scenario(s: &Scenario) -> Result<SimulationTrace> {
    s.validate()?;
    let n = s.periods()?;
    let ts = s.sampling.period;
    let kinetics = s.plant.model();
    let mut reference = Reference::new(&s.reference, &s.plant.full)?;
    let mut sensor = Sensor::new(&s.noise)?;
    let mut controller = s.build_controller()?;

    let mut records = Vec::with_capacity(n + 1);
    let mut x = s.x0;
    for k in 0..=n {
        let t = k as f64 * ts;
        let q0 = s.light.light_at(t);
        let y_ref = reference.at(t, q0)?;
        let y_meas = sensor.measure(x);
        let act = controller.step(&Observation {
            t,
            y_meas,
            y_ref,
            y_ref_dot: 0.0,
            q0,
        })?;
        records.push(TraceRecord {
            t,
            x_true: x,
            y_meas,
            y_ref,
            d_applied: act.d,
            q0,
            f_est: act.f_est,
        });
        if k < n {
            let next = plant::step(
                PlantState { x, t },
                act.d,
                &s.light,
                ts,
                s.sampling.substeps,
                &kinetics,
            )?;
            x = next.x;
        }
    }
    Ok(SimulationTrace { records })
}

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub controller: ControllerKind,
    pub mu0: f64,
    pub trace: Result<SimulationTrace>,
}

/// Runs every `(controller, mu0)` pair on `base` in parallel. `mu0` only
/// replaces the controller's model parameter; the plant and the noise
/// seed are shared by all cells. Cells come back controller-major, in input
/// order.
pub fn robustness_sweep(
    base: &Scenario,
    mu0_values: &[f64],
    controllers: &[ControllerKind],
) -> Result<Vec<SweepCell>> {
    if mu0_values.is_empty() || controllers.is_empty() {
        return Err(Error::Config(
            "sweep needs at least one mu0 value and one controller".into(),
        ));
    }
    let cells: Vec<(ControllerKind, f64)> = controllers
        .iter()
        .flat_map(|&c| mu0_values.iter().map(move |&m| (c, m)))
        .collect();
    Ok(cells
        .into_par_iter()
        .map(|(controller, mu0)| {
            let mut s = base.clone().with_controller(controller);
            s.controller.model.mu0 = mu0;
            SweepCell {
                controller,
                mu0,
                trace: run_scenario(&s),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingMetrics {
    /// Mean of `y_r - X` over the trailing window, kg/m³.
    pub steady_state_offset: f64,
    /// Integral of `|y_r - X|`, kg·h/m³.
    pub iae: f64,
    /// Time after the last reference step until `X` stays within the 2 %
    /// band; `None` if it never settles.
    pub settle_time: Option<f64>,
    /// Time until the first nonzero dilution, h.
    pub batch_phase_duration: f64,
    /// Set when the run is shorter than the offset window and the final
    /// 20 % of the run was used instead.
    pub offset_window_reduced: bool,
}

pub fn compute_metrics(trace: &SimulationTrace) -> Result<TrackingMetrics> {
    let r = &trace.records;
    let (first, last) = match (r.first(), r.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::Usage(
                "cannot compute metrics of an empty trace".into(),
            ))
        }
    };
    let duration = last.t - first.t;

    let reduced = duration < OFFSET_WINDOW;
    if reduced {
        log::warn!("run of {duration} h is shorter than the {OFFSET_WINDOW} h offset window; using the final 20 %");
    }
    let window = if reduced {
        0.2 * duration
    } else {
        OFFSET_WINDOW
    };
    let start = last.t - window - 1e-9;
    let tail: Vec<f64> = r
        .iter()
        .filter(|s| s.t >= start)
        .map(|s| s.y_ref - s.x_true)
        .collect();
    let steady_state_offset = tail.iter().sum::<f64>() / tail.len() as f64;

    let iae = r
        .windows(2)
        .map(|w| {
            0.5 * (w[1].t - w[0].t)
                * ((w[0].y_ref - w[0].x_true).abs() + (w[1].y_ref - w[1].x_true).abs())
        })
        .sum();

    let step_at = r
        .windows(2)
        .rposition(|w| (w[1].y_ref - w[0].y_ref).abs() > SETTLE_BAND * w[1].y_ref.abs())
        .map_or(0, |i| i + 1);
    let in_band = |s: &TraceRecord| (s.x_true - s.y_ref).abs() <= SETTLE_BAND * s.y_ref.abs();
    let settle_time = if in_band(last) {
        let j = r[step_at..]
            .iter()
            .rposition(|s| !in_band(s))
            .map_or(step_at, |i| step_at + i + 1);
        Some(r[j].t - r[step_at].t)
    } else {
        None
    };

    let batch_phase_duration = r
        .iter()
        .find(|s| s.d_applied > 0.0)
        .map_or(duration, |s| s.t - first.t);

    Ok(TrackingMetrics {
        steady_state_offset,
        iae,
        settle_time,
        batch_phase_duration,
        offset_window_reduced: reduced,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(duration: f64, error: f64, d: f64) -> SimulationTrace {
        let n = (duration / 0.1).round() as usize;
        SimulationTrace {
            records: (0..=n)
                .map(|k| TraceRecord {
                    t: k as f64 * 0.1,
                    x_true: 0.2 - error,
                    y_meas: 0.2 - error,
                    y_ref: 0.2,
                    d_applied: d,
                    q0: 600.0,
                    f_est: None,
                })
                .collect(),
        }
    }

    #[test]
    fn perfect_tracking_gives_zero_metrics() {
        let m = compute_metrics(&synthetic(20.0, 0.0, 0.1)).unwrap();
        assert_eq!(m.steady_state_offset, 0.0);
        assert_eq!(m.iae, 0.0);
        assert_eq!(m.settle_time, Some(0.0));
        assert_eq!(m.batch_phase_duration, 0.0);
        assert!(!m.offset_window_reduced);
    }

    #[test]
    fn constant_error_metrics() {
        let m = compute_metrics(&synthetic(20.0, 0.01, 0.1)).unwrap();
        assert!((m.steady_state_offset - 0.01).abs() < 1e-15);
        assert!((m.iae - 0.01 * 20.0).abs() < 1e-12);
        assert_eq!(m.settle_time, None);
    }

    #[test]
    fn short_runs_shrink_the_offset_window() {
        let m = compute_metrics(&synthetic(5.0, 0.0, 0.0)).unwrap();
        assert!(m.offset_window_reduced);
        assert_eq!(m.batch_phase_duration, 5.0);
        assert!(compute_metrics(&SimulationTrace::default()).is_err());
    }

    #[test]
    fn settle_time_counts_from_last_step() {
        let mut tr = synthetic(10.0, 0.0, 0.1);
        for r in tr.records.iter_mut().filter(|r| r.t > 4.05) {
            r.y_ref = 0.1;
            r.x_true = if r.t < 6.05 { 0.15 } else { 0.1 };
        }
        let m = compute_metrics(&tr).unwrap();
        let settle = m.settle_time.unwrap();
        assert!((settle - 2.0).abs() < 1e-9, "{settle}");
    }

    #[test]
    fn builtins_are_valid() {
        for name in BUILTIN_SCENARIOS {
            let s = Scenario::builtin(name).unwrap();
            s.validate().unwrap();
            assert_eq!(s.periods().unwrap(), 500);
        }
        assert!(Scenario::builtin("nope").is_none());
    }

    #[test]
    fn trace_shape_and_bounds() {
        let s = Scenario {
            duration: 5.0,
            ..Scenario::setpoint_change()
        };
        let tr = run_scenario(&s).unwrap();
        assert_eq!(tr.len(), 51);
        for (k, r) in tr.records.iter().enumerate() {
            assert!((r.t - 0.1 * k as f64).abs() < 1e-12);
            assert!((0.0..=0.5).contains(&r.d_applied));
            assert!(r.f_est.is_some());
        }
    }

    #[test]
    fn invalid_scenarios_are_rejected() {
        let s = Scenario {
            duration: 5.05,
            ..Scenario::setpoint_change()
        };
        assert!(matches!(run_scenario(&s), Err(Error::Config(_))));
        let s = Scenario {
            x0: 0.0,
            ..Scenario::setpoint_change()
        };
        assert!(run_scenario(&s).is_err());
    }

    #[test]
    fn setpoint_table_interpolates_live_values() {
        let plant = FullModelParams::default();
        let spec = ReferenceSpec::SetpointMap {
            search: SearchConfig::default(),
            table_step: Some(100.0),
        };
        let mut table = Reference::new(&spec, &plant).unwrap();
        let live_600 = optimal_setpoint(600.0, &plant, &SearchConfig::default())
            .unwrap()
            .x_star;
        assert!((table.at(0.0, 600.0).unwrap() - live_600).abs() < 1e-12);
        let mid = table.at(0.0, 650.0).unwrap();
        let live_700 = optimal_setpoint(700.0, &plant, &SearchConfig::default())
            .unwrap()
            .x_star;
        assert!(mid > live_600 && mid < live_700);
        assert!(table.at(0.0, 50.0).is_err());
    }
}
