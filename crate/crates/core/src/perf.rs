//! Fluid single-instance performance model.
//!
//! A function with `c` allocated cores serves `μ = c / (demand/1000)`
//! requests per second. Under arrival rate `λ` the local response time is a
//! processor-sharing delay with utilization capped below one, plus the time
//! needed to drain any backlog accumulated while `λ > μ`:
//!
//! ```text
//! lrt = (demand / c) / (1 - min(λ/μ, cap)) + backlog / μ · 1000
//! ```

use std::collections::BTreeMap;

use crate::dag::AppGraph;
use crate::error::{Error, Result};

pub const DEFAULT_UTILIZATION_CAP: f64 = 0.99;

/// Allocation at which nominal local response times equal CPU demand.
pub const REFERENCE_MILLICORES: u32 = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionPerf {
    /// CPU demand per request in core-milliseconds.
    pub demand_core_ms: f64,
    pub utilization_cap: f64,
}

impl FunctionPerf {
    pub fn new(demand_core_ms: f64) -> Self {
        FunctionPerf {
            demand_core_ms,
            utilization_cap: DEFAULT_UTILIZATION_CAP,
        }
    }

    pub fn validate(&self, function: &str) -> Result<()> {
        if !(self.demand_core_ms.is_finite() && self.demand_core_ms > 0.0) {
            return Err(Error::InvalidPerfParams {
                function: function.into(),
                reason: format!("demand_core_ms must be > 0, got {}", self.demand_core_ms),
            });
        }
        if !(self.utilization_cap > 0.0 && self.utilization_cap < 1.0) {
            return Err(Error::InvalidPerfParams {
                function: function.into(),
                reason: format!("utilization_cap must lie in (0, 1), got {}", self.utilization_cap),
            });
        }
        Ok(())
    }

    /// Service rate in requests per second at `millicores`.
    pub fn service_rate(&self, millicores: u32) -> f64 {
        f64::from(millicores) / self.demand_core_ms
    }
}

/// Per-function performance parameters keyed by function name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PerfParams(pub BTreeMap<String, FunctionPerf>);

impl PerfParams {
    pub fn get(&self, function: &str) -> Result<&FunctionPerf> {
        self.0
            .get(function)
            .ok_or_else(|| Error::MissingPerfEntry { function: function.into() })
    }

    pub fn insert(&mut self, function: impl Into<String>, perf: FunctionPerf) {
        self.0.insert(function.into(), perf);
    }

    /// Parameters aligned with the graph's function indices.
    pub fn for_graph(&self, graph: &AppGraph) -> Result<Vec<FunctionPerf>> {
        graph
            .functions()
            .iter()
            .map(|f| {
                let p = *self.get(&f.name)?;
                p.validate(&f.name)?;
                Ok(p)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceState {
    pub allocated_millicores: u32,
    /// Fluid queue length in requests.
    pub backlog_requests: f64,
    pub last_lrt_ms: f64,
    pub last_rt_ms: f64,
}

impl InstanceState {
    pub fn new(allocated_millicores: u32) -> Self {
        InstanceState {
            allocated_millicores,
            backlog_requests: 0.0,
            last_lrt_ms: 0.0,
            last_rt_ms: 0.0,
        }
    }

    /// Advances the instance by `dt_s` seconds under `arrival_rps` and returns
    /// the measured local response time in milliseconds.
    pub fn tick(&mut self, params: &FunctionPerf, arrival_rps: f64, dt_s: f64) -> f64 {
        debug_assert!(arrival_rps >= 0.0 && dt_s > 0.0);
        let cores = f64::from(self.allocated_millicores) / 1000.0;
        let mu = params.service_rate(self.allocated_millicores);
        let rho = arrival_rps / mu;
        self.backlog_requests = (self.backlog_requests + (arrival_rps - mu) * dt_s).max(0.0);
        let service_ms = params.demand_core_ms / cores;
        let lrt = service_ms / (1.0 - rho.min(params.utilization_cap)) + self.backlog_requests / mu * 1000.0;
        self.last_lrt_ms = lrt;
        lrt
    }
}

pub fn tick(state: &mut InstanceState, params: &FunctionPerf, arrival_rps: f64, dt_s: f64) -> f64 {
    state.tick(params, arrival_rps, dt_s)
}

/// Cores (not millicores) needed to hold local response time at `target_ms`
/// under a steady `arrival_rps`, ignoring the utilization cap. Inverse of the
/// unsaturated branch of [`InstanceState::tick`].
pub fn cores_for_target(params: &FunctionPerf, target_ms: f64, arrival_rps: f64) -> f64 {
    params.demand_core_ms * (1.0 / target_ms + arrival_rps / 1000.0)
}
