//! Dependency-aware autoscaling of serverless function graphs.
//!
//! Each function gets a local response-time set point derived from the
//! entrypoint SLAs and a nominal profile; an independent PI controller per
//! function then tracks that set point on the function's own local response
//! time. The crate also ships the baseline that tracks composed response
//! times, a fluid performance model, workload generators and the closed-loop
//! simulator used to compare the two.

pub mod bundles;
pub mod config;
pub mod controller;
pub mod dag;
pub mod error;
pub mod metrics;
pub mod perf;
pub mod profile;
pub mod setpoint;
pub mod sim;
pub mod synth;
pub mod workload;

pub use controller::{pi_step, ControlMode, ControllerConfig, ControllerState};
pub use dag::{build_graph, AppGraph, DependencyEdge, FunctionSpec, InvocationGroup};
pub use error::{Error, Result};
pub use metrics::{aggregate, compare, summarize, Comparison, FunctionSummary, RunSummary, Series};
pub use perf::{FunctionPerf, InstanceState, PerfParams};
pub use profile::{compose_nominal, profile_via_simulation, NominalProfile};
pub use setpoint::{composed_target, propagate, SetPoint, SetPointSource, SetPointTable};
pub use sim::{compose_rt, fan_out_requests, run, run_replications, RunResult, Scenario, SimMode, SimulationConfig};
pub use workload::{rate_at, WorkloadShape, WorkloadSpec};
