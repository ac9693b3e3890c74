//! Discrete-time closed loop.
//!
//! Every tick: user rates → fan-out over the graph → per-function local
//! response time from the performance model → composed total response time.
//! At the end of each control period every controller receives the window
//! mean of its measurement (local RT when dependency-aware, total RT for the
//! baseline) and its output becomes the allocation for the next period.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;

use crate::controller::{make_controllers, ControllerConfig, GainOverride, Targets};
use crate::dag::AppGraph;
use crate::error::{Error, Result};
use crate::metrics::{summarize_from, Record, RunSummary, Sample, Series};
use crate::perf::{InstanceState, PerfParams};
use crate::setpoint::SetPointTable;
use crate::workload::{WorkloadCursor, WorkloadSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SimMode {
    DependencyAware,
    Baseline,
}

impl SimMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SimMode::DependencyAware => "dependency_aware",
            SimMode::Baseline => "baseline",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "dependency_aware" => Ok(SimMode::DependencyAware),
            "baseline" => Ok(SimMode::Baseline),
            other => Err(Error::InvalidConfig(format!(
                "unknown mode '{other}' (expected dependency_aware or baseline)"
            ))),
        }
    }
}

impl fmt::Display for SimMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub duration_s: f64,
    pub tick_ms: f64,
    pub control_period_s: f64,
    pub replications: u32,
    pub master_seed: u64,
    pub mode: SimMode,
    /// Keep the per-tick series in the result (the per-window one is always kept).
    pub record_ticks: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            duration_s: 1200.0,
            tick_ms: 100.0,
            control_period_s: 1.0,
            replications: 10,
            master_seed: 0,
            mode: SimMode::DependencyAware,
            record_ticks: false,
        }
    }
}

fn exact_ratio(num: f64, den: f64) -> Option<u64> {
    let r = num / den;
    let rounded = r.round();
    (rounded >= 1.0 && (r - rounded).abs() <= 1e-9 * rounded.max(1.0)).then_some(rounded as u64)
}

impl SimulationConfig {
    /// `(ticks per control period, number of control periods)`.
    pub fn shape(&self) -> Result<(u64, u64)> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.tick_ms.is_finite() && self.tick_ms > 0.0) {
            return bad(format!("tick_ms must be > 0, got {}", self.tick_ms));
        }
        if !(self.control_period_s.is_finite() && self.control_period_s > 0.0) {
            return bad(format!("control_period_s must be > 0, got {}", self.control_period_s));
        }
        if self.replications == 0 {
            return bad("replications must be >= 1".into());
        }
        let Some(per_period) = exact_ratio(self.control_period_s * 1000.0, self.tick_ms) else {
            return bad(format!(
                "control period {} s is not a multiple of the {} ms tick",
                self.control_period_s, self.tick_ms
            ));
        };
        let Some(periods) = exact_ratio(self.duration_s, self.control_period_s) else {
            return bad(format!(
                "duration {} s is not a multiple of the {} s control period",
                self.duration_s, self.control_period_s
            ));
        };
        Ok((per_period, periods))
    }

    pub fn replication_seed(&self, replication: u32) -> u64 {
        self.master_seed.wrapping_add(u64::from(replication))
    }
}

/// Everything a run needs, validated up front.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub graph: AppGraph,
    pub perf: PerfParams,
    pub setpoints: SetPointTable,
    pub workloads: BTreeMap<String, WorkloadSpec>,
    pub controller: ControllerConfig,
    pub gain_overrides: BTreeMap<String, GainOverride>,
    pub sim: SimulationConfig,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.sim.shape()?;
        self.controller.validate()?;
        self.perf.for_graph(&self.graph)?;
        for (name, w) in &self.workloads {
            let i = self.graph.index_of(name)?;
            if !self.graph.function(i).is_entrypoint {
                return Err(Error::NotAnEntrypoint { function: name.clone() });
            }
            w.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub mode: SimMode,
    pub replication: u32,
    pub seed: u64,
    /// Per-control-period window means.
    pub windows: Series,
    pub ticks: Option<Series>,
    pub summary: RunSummary,
}

/// Per-function request rates for the given direct user rates.
pub fn fan_out_requests(graph: &AppGraph, user_rates: &BTreeMap<String, f64>) -> Result<BTreeMap<String, f64>> {
    let mut direct = vec![0.0; graph.len()];
    for (name, &r) in user_rates {
        let i = graph.index_of(name)?;
        if !graph.function(i).is_entrypoint {
            return Err(Error::NotAnEntrypoint { function: name.clone() });
        }
        direct[i] = r;
    }
    Ok(by_name(graph, &graph.fan_out(&direct)))
}

/// Total response times composed from per-function local ones.
pub fn compose_rt(graph: &AppGraph, lrt: &BTreeMap<String, f64>) -> Result<BTreeMap<String, f64>> {
    let local = graph
        .functions()
        .iter()
        .map(|f| {
            lrt.get(&f.name)
                .copied()
                .ok_or_else(|| Error::MissingProfileEntry { function: f.name.clone() })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(by_name(graph, &graph.compose(&local)))
}

fn by_name(graph: &AppGraph, values: &[f64]) -> BTreeMap<String, f64> {
    graph
        .functions()
        .iter()
        .zip(values)
        .map(|(f, &v)| (f.name.clone(), v))
        .collect()
}

/// Runs one replication of `scenario` in `mode`.
pub fn run(scenario: &Scenario, mode: SimMode, replication: u32) -> Result<RunResult> {
    scenario.validate()?;
    let graph = &scenario.graph;
    let n = graph.len();
    let (ticks_per_period, periods) = scenario.sim.shape()?;
    let perf = scenario.perf.for_graph(graph)?;
    let targets = match mode {
        SimMode::DependencyAware => Targets::Local(&scenario.setpoints),
        SimMode::Baseline => Targets::Total {
            alpha: scenario.setpoints.alpha,
        },
    };
    let mut controllers = make_controllers(graph, targets, &scenario.controller, &scenario.gain_overrides)?;
    let mut instances: Vec<InstanceState> = controllers
        .iter()
        .map(|c| InstanceState::new(c.state.last_output_millicores))
        .collect();

    let seed = scenario.sim.replication_seed(replication);
    let mut cursors: Vec<(usize, WorkloadCursor)> = scenario
        .workloads
        .iter()
        .map(|(name, w)| Ok((graph.index_of(name)?, WorkloadCursor::new(w.for_replication(seed)))))
        .collect::<Result<_>>()?;

    let names: Vec<String> = graph.functions().iter().map(|f| f.name.clone()).collect();
    let mut windows = Series::new(names.clone());
    let mut ticks = scenario.sim.record_ticks.then(|| Series::new(names.clone()));
    let dt = scenario.sim.tick_ms / 1000.0;

    let mut direct = vec![0.0; n];
    let mut lrt = vec![0.0; n];
    let mut sum_arrival = vec![0.0; n];
    let mut sum_lrt = vec![0.0; n];
    let mut sum_rt = vec![0.0; n];

    for period in 0..periods {
        sum_arrival.fill(0.0);
        sum_lrt.fill(0.0);
        sum_rt.fill(0.0);
        for k in 0..ticks_per_period {
            let tick = period * ticks_per_period + k;
            let t = tick as f64 * dt;
            direct.fill(0.0);
            for (i, cursor) in &mut cursors {
                direct[*i] += cursor.rate_at(t);
            }
            let rates = graph.fan_out(&direct);
            for i in 0..n {
                lrt[i] = instances[i].tick(&perf[i], rates[i], dt);
            }
            let rt = graph.compose(&lrt);
            for i in 0..n {
                instances[i].last_rt_ms = rt[i];
                sum_arrival[i] += rates[i];
                sum_lrt[i] += lrt[i];
                sum_rt[i] += rt[i];
            }
            if let Some(series) = ticks.as_mut() {
                series.records.push(Record {
                    time_s: t,
                    samples: (0..n)
                        .map(|i| Sample {
                            arrival_rps: rates[i],
                            lrt_ms: lrt[i],
                            rt_ms: rt[i],
                            millicores: instances[i].allocated_millicores,
                        })
                        .collect(),
                });
            }
        }

        let count = ticks_per_period as f64;
        let window_end = (period + 1) as f64 * scenario.sim.control_period_s;
        windows.records.push(Record {
            time_s: window_end,
            samples: (0..n)
                .map(|i| Sample {
                    arrival_rps: sum_arrival[i] / count,
                    lrt_ms: sum_lrt[i] / count,
                    rt_ms: sum_rt[i] / count,
                    millicores: instances[i].allocated_millicores,
                })
                .collect(),
        });

        let last_tick = (period + 1) * ticks_per_period - 1;
        for (i, ctrl) in controllers.iter_mut().enumerate() {
            ctrl.state = if sum_arrival[i] == 0.0 {
                ctrl.state.idle(&ctrl.config)
            } else {
                let measured = match mode {
                    SimMode::DependencyAware => sum_lrt[i] / count,
                    SimMode::Baseline => sum_rt[i] / count,
                };
                ctrl.state
                    .step(&ctrl.config, measured)
                    .map_err(|e| Error::Simulation {
                        tick: last_tick,
                        function: names[i].clone(),
                        source: Box::new(e),
                    })?
            };
            instances[i].allocated_millicores = ctrl.state.last_output_millicores;
        }
    }

    let slas: Vec<Option<f64>> = graph.functions().iter().map(|f| f.sla_ms).collect();
    let functions = summarize_from(&windows, &slas, 0.0)?;
    Ok(RunResult {
        mode,
        replication,
        seed,
        windows,
        ticks,
        summary: RunSummary {
            mode: mode.as_str().to_string(),
            replication,
            seed,
            functions,
        },
    })
}

/// All replications of one mode, at most `jobs` at a time; results in replication order.
pub fn run_replications(scenario: &Scenario, mode: SimMode, jobs: usize) -> Result<Vec<RunResult>> {
    scenario.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        (0..scenario.sim.replications)
            .into_par_iter()
            .map(|k| run(scenario, mode, k))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::{build_graph, DependencyEdge, FunctionSpec};

    fn fig1() -> AppGraph {
        build_graph(
            vec![
                FunctionSpec::entrypoint("f1", Some(90.0)),
                FunctionSpec::internal("f2", None),
                FunctionSpec::internal("f3", None),
                FunctionSpec::internal("f4", None),
                FunctionSpec::entrypoint("f5", None),
            ],
            vec![
                DependencyEdge::new("f1", "f2", 1, 1),
                DependencyEdge::new("f1", "f3", 2, 1),
                DependencyEdge::new("f2", "f4", 1, 1),
                DependencyEdge::new("f2", "f5", 2, 1),
            ],
        )
        .unwrap()
    }

    fn rates(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
    }

    #[test]
    fn fan_out_fig1() {
        let r = fan_out_requests(&fig1(), &rates(&[("f1", 10.0), ("f5", 4.0)])).unwrap();
        assert_eq!(r, rates(&[("f1", 10.0), ("f2", 10.0), ("f3", 10.0), ("f4", 10.0), ("f5", 14.0)]));
    }

    #[test]
    fn fan_out_single_and_multiplier() {
        let g = build_graph(vec![FunctionSpec::entrypoint("f", Some(1.0))], vec![]).unwrap();
        assert_eq!(fan_out_requests(&g, &rates(&[("f", 7.0)])).unwrap()["f"], 7.0);

        let g = build_graph(
            vec![FunctionSpec::entrypoint("p", Some(1.0)), FunctionSpec::entrypoint("c", None)],
            vec![DependencyEdge::new("p", "c", 1, 2)],
        )
        .unwrap();
        assert_eq!(fan_out_requests(&g, &rates(&[("p", 5.0), ("c", 10.0)])).unwrap()["c"], 20.0);
        assert!(matches!(
            fan_out_requests(&fig1(), &rates(&[("f2", 1.0)])),
            Err(Error::NotAnEntrypoint { .. })
        ));
    }

    #[test]
    fn compose_rt_cases() {
        let g = fig1();
        let zeros = rates(&[("f1", 0.0), ("f2", 0.0), ("f3", 0.0), ("f4", 0.0), ("f5", 0.0)]);
        assert!(compose_rt(&g, &zeros).unwrap().values().all(|&v| v == 0.0));
        let lrt = rates(&[("f1", 1.0), ("f2", 1.0), ("f3", 1.0), ("f4", 1.0), ("f5", 1.0)]);
        let rt = compose_rt(&g, &lrt).unwrap();
        assert_eq!(rt["f4"], 1.0);
        assert_eq!(rt["f1"], 5.0);
        assert!(matches!(compose_rt(&g, &rates(&[("f1", 1.0)])), Err(Error::MissingProfileEntry { .. })));
    }

    #[test]
    fn sim_config_shape() {
        let c = SimulationConfig::default();
        assert_eq!(c.shape().unwrap(), (10, 1200));
        let bad = SimulationConfig {
            tick_ms: 300.0,
            ..SimulationConfig::default()
        };
        assert!(bad.shape().is_err());
        let bad = SimulationConfig {
            duration_s: 10.5,
            ..SimulationConfig::default()
        };
        assert!(bad.shape().is_err());
        let bad = SimulationConfig {
            replications: 0,
            ..SimulationConfig::default()
        };
        assert!(bad.shape().is_err());
        assert_eq!(
            SimMode::parse("baseline").unwrap().to_string(),
            "baseline"
        );
        assert!(SimMode::parse("nope").is_err());
    }
}
