//! JSON file formats: application, profile and experiment.
//!
//! Relative paths inside an experiment resolve against the experiment file's
//! directory; `bundled:<name>` selects one of the embedded applications.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bundles;
use crate::controller::{ControlMode, ControllerConfig, GainOverride};
use crate::dag::{build_graph, AppGraph, DependencyEdge, FunctionSpec};
use crate::error::{Error, Result};
use crate::perf::{FunctionPerf, PerfParams, DEFAULT_UTILIZATION_CAP};
use crate::profile::{compose_nominal, profile_via_simulation, NominalProfile};
use crate::setpoint::{entry_slas, propagate, SetPointTable};
use crate::sim::{Scenario, SimMode, SimulationConfig};
use crate::workload::{WorkloadShape, WorkloadSpec};

pub const BUNDLED_PREFIX: &str = "bundled:";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sla_ms: Option<f64>,
    #[serde(default)]
    pub entrypoint: bool,
    /// Core-milliseconds of work per request; defaults to the nominal local RT.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demand_core_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utilization_cap: Option<f64>,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeEntry {
    pub from: String,
    pub to: String,
    pub group_id: u32,
    #[serde(default = "one")]
    pub multiplier: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Set when the topology or numbers were rebuilt from an incomplete description.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reconstructed: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    pub functions: Vec<FunctionEntry>,
    #[serde(default)]
    pub edges: Vec<EdgeEntry>,
}

impl AppFile {
    pub fn graph(&self) -> Result<AppGraph> {
        build_graph(
            self.functions
                .iter()
                .map(|f| FunctionSpec {
                    name: f.name.clone(),
                    sla_ms: f.sla_ms,
                    is_entrypoint: f.entrypoint,
                })
                .collect(),
            self.edges
                .iter()
                .map(|e| DependencyEdge::new(e.from.clone(), e.to.clone(), e.group_id, e.multiplier))
                .collect(),
        )
    }

    /// Performance parameters; functions without a demand fall back to `nlrt`.
    pub fn perf(&self, nlrt: Option<&BTreeMap<String, f64>>) -> Result<PerfParams> {
        let mut perf = PerfParams::default();
        for f in &self.functions {
            let demand = match (f.demand_core_ms, nlrt.and_then(|m| m.get(&f.name))) {
                (Some(d), _) => d,
                (None, Some(&d)) => d,
                (None, None) => return Err(Error::MissingPerfEntry { function: f.name.clone() }),
            };
            let p = FunctionPerf {
                demand_core_ms: demand,
                utilization_cap: f.utilization_cap.unwrap_or(DEFAULT_UTILIZATION_CAP),
            };
            p.validate(&f.name)?;
            perf.insert(f.name.clone(), p);
        }
        Ok(perf)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileEntry {
    pub nlrt_ms: f64,
}

pub type ProfileFile = BTreeMap<String, ProfileEntry>;

pub fn profile_nlrt(p: &ProfileFile) -> BTreeMap<String, f64> {
    p.iter().map(|(k, v)| (k.clone(), v.nlrt_ms)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileRef {
    Path(String),
    Inline(ProfileFile),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadEntry {
    pub kind: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub seed: u64,
}

impl WorkloadEntry {
    pub fn from_spec(spec: &WorkloadSpec) -> Self {
        let params = match spec.shape {
            WorkloadShape::Ramp {
                start_rps,
                increment_rps_per_s,
                max_rps,
            } => vec![
                ("start_rps", start_rps),
                ("increment_rps_per_s", increment_rps_per_s),
                ("max_rps", max_rps),
            ],
            WorkloadShape::Step {
                period_s,
                low_rps,
                high_rps,
            }
            | WorkloadShape::BottleneckStep {
                period_s,
                low_rps,
                high_rps,
            } => vec![("period_s", period_s), ("low_rps", low_rps), ("high_rps", high_rps)],
            WorkloadShape::Constant { rps } => vec![("rps", rps)],
        };
        WorkloadEntry {
            kind: spec.shape.kind().to_string(),
            params: params.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            seed: spec.seed,
        }
    }

    /// Missing parameters take the defaults of the named shape.
    pub fn to_spec(&self) -> Result<WorkloadSpec> {
        let (defaults, allowed): (WorkloadShape, &[&str]) = match self.kind.as_str() {
            "ramp" => (
                WorkloadShape::default_ramp(),
                &["start_rps", "increment_rps_per_s", "max_rps"],
            ),
            "step" => (WorkloadShape::default_step(), &["period_s", "low_rps", "high_rps"]),
            "bottleneck_step" => (WorkloadShape::default_bottleneck(), &["period_s", "low_rps", "high_rps"]),
            "constant" => (WorkloadShape::Constant { rps: 0.0 }, &["rps"]),
            other => return Err(Error::InvalidWorkload(format!("unknown workload kind '{other}'"))),
        };
        if let Some(k) = self.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::InvalidWorkload(format!(
                "parameter '{k}' does not apply to a {} workload",
                self.kind
            )));
        }
        let get = |k: &str, d: f64| self.params.get(k).copied().unwrap_or(d);
        let shape = match defaults {
            WorkloadShape::Ramp {
                start_rps,
                increment_rps_per_s,
                max_rps,
            } => WorkloadShape::Ramp {
                start_rps: get("start_rps", start_rps),
                increment_rps_per_s: get("increment_rps_per_s", increment_rps_per_s),
                max_rps: get("max_rps", max_rps),
            },
            WorkloadShape::Step {
                period_s,
                low_rps,
                high_rps,
            } => WorkloadShape::Step {
                period_s: get("period_s", period_s),
                low_rps: get("low_rps", low_rps),
                high_rps: get("high_rps", high_rps),
            },
            WorkloadShape::BottleneckStep {
                period_s,
                low_rps,
                high_rps,
            } => WorkloadShape::BottleneckStep {
                period_s: get("period_s", period_s),
                low_rps: get("low_rps", low_rps),
                high_rps: get("high_rps", high_rps),
            },
            WorkloadShape::Constant { rps } => WorkloadShape::Constant { rps: get("rps", rps) },
        };
        let spec = WorkloadSpec::new(shape, self.seed);
        spec.validate()?;
        Ok(spec)
    }
}

fn default_alpha() -> f64 {
    0.5
}
fn default_cores_min() -> u32 {
    100
}
fn default_cores_max() -> u32 {
    8000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainEntry {
    pub gain_p: f64,
    pub gain_i: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerEntry {
    pub gain_p: f64,
    pub gain_i: f64,
    #[serde(default = "default_cores_min")]
    pub cores_min_millicores: u32,
    #[serde(default = "default_cores_max")]
    pub cores_max_millicores: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_millicores: Option<u32>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_function: BTreeMap<String, GainEntry>,
}

fn d_duration() -> f64 {
    1200.0
}
fn d_tick() -> f64 {
    100.0
}
fn d_period() -> f64 {
    1.0
}
fn d_reps() -> u32 {
    10
}
fn d_mode() -> String {
    "dependency_aware".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimEntry {
    #[serde(default = "d_duration")]
    pub duration_s: f64,
    #[serde(default = "d_tick")]
    pub tick_ms: f64,
    #[serde(default = "d_period")]
    pub control_period_s: f64,
    #[serde(default = "d_reps")]
    pub replications: u32,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "d_mode")]
    pub mode: String,
    #[serde(default)]
    pub record_ticks: bool,
}

impl Default for SimEntry {
    fn default() -> Self {
        SimEntry {
            duration_s: d_duration(),
            tick_ms: d_tick(),
            control_period_s: d_period(),
            replications: d_reps(),
            master_seed: 0,
            mode: d_mode(),
            record_ticks: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub app: String,
    /// Nominal local RTs; measured by simulation at the reference allocation when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileRef>,
    pub workloads: BTreeMap<String, WorkloadEntry>,
    pub controller: ControllerEntry,
    #[serde(default)]
    pub sim: SimEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| Error::Parse {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_str<T: serde::de::DeserializeOwned>(text: &str, label: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|source| Error::Parse {
        path: PathBuf::from(label),
        source,
    })
}

/// Loads an application from a file path or a `bundled:<name>` reference.
pub fn load_app(reference: &str, base: &Path) -> Result<AppFile> {
    match reference.strip_prefix(BUNDLED_PREFIX) {
        Some(name) => parse_str(bundles::app(name)?, reference),
        None => read_json(&base.join(reference)),
    }
}

pub fn load_profile(reference: &str, base: &Path) -> Result<ProfileFile> {
    match reference.strip_prefix(BUNDLED_PREFIX) {
        Some(name) => parse_str(bundles::profile(name)?, reference),
        None => read_json(&base.join(reference)),
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub name: String,
    pub app: AppFile,
    pub profile: NominalProfile,
    pub scenario: Scenario,
    pub output_dir: PathBuf,
}

/// Number of profiling requests when the nominal profile is measured.
pub const PROFILE_WARMUP: usize = 10;
pub const PROFILE_SAMPLES: usize = 100;

impl ExperimentFile {
    pub fn load(path: &Path) -> Result<Experiment> {
        let file: ExperimentFile = read_json(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fallback = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        file.resolve(base, fallback)
    }

    pub fn from_json(text: &str, base: &Path) -> Result<Experiment> {
        let file: ExperimentFile = parse_str(text, "<experiment>")?;
        file.resolve(base, None)
    }

    pub fn resolve(&self, base: &Path, fallback_name: Option<String>) -> Result<Experiment> {
        let app = load_app(&self.app, base)?;
        let graph = app.graph()?;
        let given = match &self.profile {
            Some(ProfileRef::Path(p)) => Some(profile_nlrt(&load_profile(p, base)?)),
            Some(ProfileRef::Inline(m)) => Some(profile_nlrt(m)),
            None => None,
        };
        let perf = app.perf(given.as_ref())?;
        let nlrt = match given {
            Some(m) => m,
            None => profile_via_simulation(&graph, &perf, PROFILE_WARMUP, PROFILE_SAMPLES)?,
        };
        let profile = compose_nominal(&graph, &nlrt)?;
        let alpha = self.controller.alpha;
        let setpoints = propagate(&graph, &profile, &entry_slas(&graph), alpha)?;

        let mut workloads = BTreeMap::new();
        for (name, w) in &self.workloads {
            workloads.insert(name.clone(), w.to_spec()?);
        }
        let c = &self.controller;
        let controller = ControllerConfig {
            gain_p: c.gain_p,
            gain_i: c.gain_i,
            cores_min_millicores: c.cores_min_millicores,
            cores_max_millicores: c.cores_max_millicores,
            period_s: self.sim.control_period_s,
            mode: ControlMode::Local,
            initial_millicores: c.initial_millicores,
        };
        let gain_overrides = c
            .per_function
            .iter()
            .map(|(k, g)| {
                (
                    k.clone(),
                    GainOverride {
                        gain_p: g.gain_p,
                        gain_i: g.gain_i,
                    },
                )
            })
            .collect();
        let s = &self.sim;
        let sim = SimulationConfig {
            duration_s: s.duration_s,
            tick_ms: s.tick_ms,
            control_period_s: s.control_period_s,
            replications: s.replications,
            master_seed: s.master_seed,
            mode: SimMode::parse(&s.mode)?,
            record_ticks: s.record_ticks,
        };
        let scenario = Scenario {
            graph,
            perf,
            setpoints,
            workloads,
            controller,
            gain_overrides,
            sim,
        };
        scenario.validate()?;
        let name = self
            .name
            .clone()
            .or(fallback_name)
            .or_else(|| app.name.clone())
            .unwrap_or_else(|| "experiment".into());
        let output_dir = PathBuf::from(self.output_dir.clone().unwrap_or_else(|| format!("out/{name}")));
        Ok(Experiment {
            name,
            app,
            profile,
            scenario,
            output_dir,
        })
    }
}

/// Set points for an application file plus optional profile (measured when absent).
pub fn setpoints_for(app: &AppFile, profile: Option<&ProfileFile>, alpha: f64) -> Result<(AppGraph, NominalProfile, SetPointTable)> {
    let graph = app.graph()?;
    let nlrt = match profile {
        Some(p) => profile_nlrt(p),
        None => profile_via_simulation(&graph, &app.perf(None)?, PROFILE_WARMUP, PROFILE_SAMPLES)?,
    };
    let nominal = compose_nominal(&graph, &nlrt)?;
    let table = propagate(&graph, &nominal, &entry_slas(&graph), alpha)?;
    Ok((graph, nominal, table))
}
