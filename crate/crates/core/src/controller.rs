//! Per-function PI controllers regulating the reciprocal of response time.
//!
//! Each control period:
//!
//! ```text
//! err   = 1/set_point − 1/measured
//! P     = gain_p · err
//! I     = I + gain_i · err
//! cores = clamp(P + I, cores_min, cores_max)
//! ```
//!
//! A slow function (measured > set point) yields a positive error and thus
//! more cores. While the output clamps, the integral keeps its previous value.

use std::collections::BTreeMap;

use crate::dag::AppGraph;
use crate::error::{Error, Result};
use crate::setpoint::{validate_alpha, SetPointTable};

/// What a controller measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ControlMode {
    /// Local response time against the local set point.
    Local,
    /// Total response time against `α·SLA`.
    Total,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub gain_p: f64,
    pub gain_i: f64,
    pub cores_min_millicores: u32,
    pub cores_max_millicores: u32,
    pub period_s: f64,
    pub mode: ControlMode,
    /// Output before the first step; defaults to `cores_min_millicores`.
    pub initial_millicores: Option<u32>,
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidController(m));
        if !(self.gain_p.is_finite() && self.gain_i.is_finite()) {
            return bad(format!("gains must be finite, got {} / {}", self.gain_p, self.gain_i));
        }
        if self.cores_min_millicores == 0 {
            return bad("cores_min_millicores must be >= 1".into());
        }
        if self.cores_min_millicores > self.cores_max_millicores {
            return bad(format!(
                "cores_min_millicores ({}) exceeds cores_max_millicores ({})",
                self.cores_min_millicores, self.cores_max_millicores
            ));
        }
        if !(self.period_s.is_finite() && self.period_s > 0.0) {
            return bad(format!("period_s must be > 0, got {}", self.period_s));
        }
        if let Some(init) = self.initial_millicores {
            if !(self.cores_min_millicores..=self.cores_max_millicores).contains(&init) {
                return bad(format!("initial_millicores {init} outside bounds"));
            }
        }
        Ok(())
    }

    pub fn initial(&self) -> u32 {
        self.initial_millicores.unwrap_or(self.cores_min_millicores)
    }

    fn clamp(&self, raw: f64) -> (u32, bool) {
        let lo = f64::from(self.cores_min_millicores);
        let hi = f64::from(self.cores_max_millicores);
        if raw < lo {
            (self.cores_min_millicores, true)
        } else if raw > hi {
            (self.cores_max_millicores, true)
        } else {
            (raw.round() as u32, false)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub integral: f64,
    pub set_point_ms: f64,
    pub last_output_millicores: u32,
}

impl ControllerState {
    pub fn new(set_point_ms: f64, config: &ControllerConfig) -> Self {
        let init = config.initial();
        ControllerState {
            integral: f64::from(init),
            set_point_ms,
            last_output_millicores: init,
        }
    }

    /// One control step; returns the next state, whose output is the new allocation.
    pub fn step(&self, config: &ControllerConfig, measured_ms: f64) -> Result<ControllerState> {
        if measured_ms.is_nan() || measured_ms <= 0.0 {
            return Err(Error::NonPositiveMeasurement { value: measured_ms });
        }
        let err = 1.0 / self.set_point_ms - 1.0 / measured_ms;
        let p = config.gain_p * err;
        let integral = self.integral + config.gain_i * err;
        let (output, clamped) = config.clamp(p + integral);
        Ok(ControllerState {
            integral: if clamped { self.integral } else { integral },
            set_point_ms: self.set_point_ms,
            last_output_millicores: output,
        })
    }

    /// Window without requests: nothing to measure, scale down to the floor.
    pub fn idle(&self, config: &ControllerConfig) -> ControllerState {
        ControllerState {
            integral: f64::from(config.cores_min_millicores),
            set_point_ms: self.set_point_ms,
            last_output_millicores: config.cores_min_millicores,
        }
    }
}

pub fn pi_step(state: &ControllerState, config: &ControllerConfig, measured_ms: f64) -> Result<(ControllerState, u32)> {
    let next = state.step(config, measured_ms)?;
    let out = next.last_output_millicores;
    Ok((next, out))
}

/// Gains for one function, overriding the shared pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainOverride {
    pub gain_p: f64,
    pub gain_i: f64,
}

/// What the controllers regulate against.
#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    /// Dependency-aware: each function tracks its local set point.
    Local(&'a SetPointTable),
    /// Baseline: each function tracks `α·SLA` of its own total response time.
    Total { alpha: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    pub config: ControllerConfig,
    pub state: ControllerState,
}

/// One independent controller per function, in graph index order.
pub fn make_controllers(
    graph: &AppGraph,
    targets: Targets<'_>,
    config: &ControllerConfig,
    overrides: &BTreeMap<String, GainOverride>,
) -> Result<Vec<Controller>> {
    config.validate()?;
    for name in overrides.keys() {
        graph.index_of(name)?;
    }
    let mode = match targets {
        Targets::Local(_) => ControlMode::Local,
        Targets::Total { .. } => ControlMode::Total,
    };
    graph
        .functions()
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let set_point = match targets {
                Targets::Local(table) => table.at(i).lsp_ms,
                Targets::Total { alpha } => {
                    validate_alpha(alpha)?;
                    let sla = f.sla_ms.ok_or_else(|| Error::MissingSla { function: f.name.clone() })?;
                    alpha * sla
                }
            };
            let mut cfg = ControllerConfig { mode, ..config.clone() };
            if let Some(o) = overrides.get(&f.name) {
                cfg.gain_p = o.gain_p;
                cfg.gain_i = o.gain_i;
                cfg.validate()?;
            }
            let state = ControllerState::new(set_point, &cfg);
            Ok(Controller { config: cfg, state })
        })
        .collect()
}
