//! Random application generator matched to target graph statistics.
//!
//! The first `ceil(entrypoints / 2)` nodes are user-only roots; every other
//! node gets exactly one caller chosen among earlier nodes, which keeps the
//! graph acyclic by construction. Callers are the first `K` nodes, with `K`
//! picked so that the mean out-degree of calling functions hits the target.
//! The remaining entrypoints are drawn from interior nodes, so they receive
//! traffic both from users and from callers.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{
    AppFile, ControllerEntry, EdgeEntry, ExperimentFile, FunctionEntry, GainEntry, ProfileEntry, ProfileFile, ProfileRef,
    SimEntry, WorkloadEntry,
};
use crate::dag::{build_graph, AppGraph, DependencyEdge, FunctionSpec};
use crate::error::{Error, Result};
use crate::profile::compose_nominal;
use crate::workload::{WorkloadShape, WorkloadSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub n_functions: usize,
    pub n_entrypoints: usize,
    /// Mean number of callees over functions that call anything.
    pub avg_out_degree: f64,
    /// Share of edges that belong to a parallel group.
    pub parallel_fraction: f64,
    pub seed: u64,
    pub nlrt_min_ms: f64,
    pub nlrt_max_ms: f64,
    /// Every function's SLA is this multiple of its nominal total RT.
    pub sla_factor: f64,
}

impl SynthParams {
    pub fn new(n_functions: usize, n_entrypoints: usize, avg_out_degree: f64, parallel_fraction: f64, seed: u64) -> Self {
        SynthParams {
            n_functions,
            n_entrypoints,
            avg_out_degree,
            parallel_fraction,
            seed,
            nlrt_min_ms: 10.0,
            nlrt_max_ms: 40.0,
            sla_factor: 2.0,
        }
    }

    fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InfeasibleShape(m));
        if self.n_functions == 0 {
            return bad("need at least one function".into());
        }
        if self.n_entrypoints == 0 || self.n_entrypoints > self.n_functions {
            return bad(format!(
                "{} entrypoints for {} functions",
                self.n_entrypoints, self.n_functions
            ));
        }
        if !(0.0..=1.0).contains(&self.parallel_fraction) {
            return bad(format!("parallel fraction {} outside [0, 1]", self.parallel_fraction));
        }
        if !(self.nlrt_min_ms > 0.0 && self.nlrt_min_ms <= self.nlrt_max_ms && self.nlrt_max_ms.is_finite()) {
            return bad(format!("bad nlrt range {}..{}", self.nlrt_min_ms, self.nlrt_max_ms));
        }
        if !(self.sla_factor.is_finite() && self.sla_factor >= 1.0) {
            return bad(format!("sla factor must be >= 1, got {}", self.sla_factor));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GraphStats {
    pub functions: usize,
    pub entrypoints: usize,
    pub avg_out_degree: f64,
    pub parallel_fraction: f64,
}

pub fn graph_stats(graph: &AppGraph) -> GraphStats {
    let callers = (0..graph.len()).filter(|&i| !graph.is_leaf(i)).count();
    let edges = graph.edges().len();
    let parallel: usize = (0..graph.len())
        .flat_map(|i| graph.groups_of(i))
        .filter(|g| g.is_parallel())
        .map(|g| g.members.len())
        .sum();
    GraphStats {
        functions: graph.len(),
        entrypoints: graph.functions().iter().filter(|f| f.is_entrypoint).count(),
        avg_out_degree: if callers == 0 { 0.0 } else { edges as f64 / callers as f64 },
        parallel_fraction: if edges == 0 { 0.0 } else { parallel as f64 / edges as f64 },
    }
}

#[derive(Debug, Clone)]
pub struct Synthesized {
    pub app: AppFile,
    pub profile: ProfileFile,
    pub stats: GraphStats,
}

pub fn synthesize(p: &SynthParams) -> Result<Synthesized> {
    p.check()?;
    let n = p.n_functions;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let width = n.to_string().len().max(2);
    let names: Vec<String> = (1..=n).map(|i| format!("f{i:0width$}")).collect();

    let roots = if n == 1 { 1 } else { p.n_entrypoints.div_ceil(2) };
    let edge_count = n - roots;
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    if edge_count > 0 {
        if !(p.avg_out_degree.is_finite() && p.avg_out_degree >= 1.0) {
            return Err(Error::InfeasibleShape(format!(
                "average out-degree {} below 1",
                p.avg_out_degree
            )));
        }
        let callers = (edge_count as f64 / p.avg_out_degree).round() as usize;
        if callers == 0 || callers > edge_count {
            return Err(Error::InfeasibleShape(format!(
                "average out-degree {} cannot be met with {} edges",
                p.avg_out_degree, edge_count
            )));
        }
        for j in 0..edge_count {
            let child = roots + j;
            let parent = if j < callers { j } else { rng.random_range(0..callers) };
            children[parent].push(child);
        }
    }

    let mut entry = vec![false; n];
    entry[..roots].iter_mut().for_each(|e| *e = true);
    let mut interior: Vec<usize> = (roots..n).collect();
    interior.shuffle(&mut rng);
    for &i in interior.iter().take(p.n_entrypoints - roots) {
        entry[i] = true;
    }

    let mut budget = (p.parallel_fraction * edge_count as f64).round() as usize;
    let mut edges = Vec::with_capacity(edge_count);
    for (parent, kids) in children.iter_mut().enumerate() {
        kids.shuffle(&mut rng);
        let mut group_id = 1;
        let mut rest = &kids[..];
        while !rest.is_empty() {
            let size = if budget >= 2 && rest.len() >= 2 {
                budget.min(rest.len())
            } else {
                1
            };
            if size > 1 {
                budget -= size;
            }
            for &child in &rest[..size] {
                edges.push(EdgeEntry {
                    from: names[parent].clone(),
                    to: names[child].clone(),
                    group_id,
                    multiplier: 1,
                });
            }
            group_id += 1;
            rest = &rest[size..];
        }
    }
    edges.sort_by(|a, b| (&a.from, a.group_id, &a.to).cmp(&(&b.from, b.group_id, &b.to)));

    let nlrt: Vec<f64> = (0..n)
        .map(|_| (rng.random_range(p.nlrt_min_ms..=p.nlrt_max_ms) * 10.0).round() / 10.0)
        .collect();
    let mut app = AppFile {
        name: Some(format!("synthetic-{n}")),
        reconstructed: None,
        notes: Some(format!(
            "generated: {n} functions, {} entrypoints, out-degree {}, parallel fraction {}, seed {}",
            p.n_entrypoints, p.avg_out_degree, p.parallel_fraction, p.seed
        )),
        functions: (0..n)
            .map(|i| FunctionEntry {
                name: names[i].clone(),
                sla_ms: None,
                entrypoint: entry[i],
                demand_core_ms: Some(nlrt[i]),
                utilization_cap: None,
            })
            .collect(),
        edges,
    };
    let nlrt_map: BTreeMap<String, f64> = names.iter().cloned().zip(nlrt.iter().copied()).collect();
    // SLAs depend on nominal total RTs, so compose on the SLA-less topology first.
    let mut provisional = app.clone();
    provisional.functions.iter_mut().for_each(|f| f.sla_ms = Some(1.0));
    let graph = provisional.graph()?;
    let nominal = compose_nominal(&graph, &nlrt_map)?;
    for (i, f) in app.functions.iter_mut().enumerate() {
        let nrt = nominal.nrt(graph.index_of(&names[i])?);
        f.sla_ms = Some((p.sla_factor * nrt * 10.0).round() / 10.0);
    }
    let stats = graph_stats(&app.graph()?);
    let profile = nlrt_map
        .into_iter()
        .map(|(k, v)| (k, ProfileEntry { nlrt_ms: v }))
        .collect();
    Ok(Synthesized { app, profile, stats })
}


/// Gains per core-millisecond of demand. The local loop's sensitivity
/// d(1/lrt)/d(millicores) is 1/(1000·demand) in the stable regime, so scaling
/// both gains by demand gives every function the same closed-loop dynamics.
pub const GAIN_P_PER_DEMAND_MS: f64 = 100.0;
pub const GAIN_I_PER_DEMAND_MS: f64 = 800.0;

pub fn demand_scaled_gains(app: &AppFile) -> BTreeMap<String, GainEntry> {
    app.functions
        .iter()
        .filter_map(|f| {
            let d = f.demand_core_ms?;
            Some((
                f.name.clone(),
                GainEntry {
                    gain_p: GAIN_P_PER_DEMAND_MS * d,
                    gain_i: GAIN_I_PER_DEMAND_MS * d,
                },
            ))
        })
        .collect()
}

/// Experiment over a synthesized app: user-only entrypoints alternate ramp
/// and step traffic; entrypoints that also have callers get step traffic, or
/// the high-rate bottleneck step when `bottleneck` is set.
pub fn experiment_template(app_ref: &str, profile_ref: &str, app: &AppFile, bottleneck: bool, seed: u64) -> Result<ExperimentFile> {
    let graph = app.graph()?;
    let mut workloads = BTreeMap::new();
    let mut roots = 0u64;
    let mut stream = 0u64;
    for i in 0..graph.len() {
        let f = graph.function(i);
        if !f.is_entrypoint {
            continue;
        }
        let shape = if graph.has_callers(i) {
            if bottleneck {
                WorkloadShape::default_bottleneck()
            } else {
                WorkloadShape::default_step()
            }
        } else {
            roots += 1;
            if roots % 2 == 1 {
                WorkloadShape::default_ramp()
            } else {
                WorkloadShape::default_step()
            }
        };
        stream += 1;
        workloads.insert(f.name.clone(), WorkloadEntry::from_spec(&WorkloadSpec::new(shape, stream)));
    }
    Ok(ExperimentFile {
        name: None,
        app: app_ref.to_string(),
        profile: Some(ProfileRef::Path(profile_ref.to_string())),
        workloads,
        controller: ControllerEntry {
            gain_p: GAIN_P_PER_DEMAND_MS * 10.0,
            gain_i: GAIN_I_PER_DEMAND_MS * 10.0,
            cores_min_millicores: 100,
            cores_max_millicores: 8000,
            initial_millicores: Some(1000),
            alpha: 0.5,
            per_function: demand_scaled_gains(app),
        },
        sim: SimEntry {
            master_seed: seed,
            ..SimEntry::default()
        },
        output_dir: None,
    })
}

/// Shape of [`random_graph`] outputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomGraphParams {
    pub max_nodes: usize,
    /// One caller per non-root node; otherwise up to `max_parents` distinct callers.
    pub tree: bool,
    pub max_parents: usize,
    pub max_multiplier: u32,
    /// Chance that a callee joins its predecessor's group instead of opening a new one.
    pub parallel_prob: f64,
    /// Chance that an interior node is also an entrypoint with its own SLA.
    pub interior_entry_prob: f64,
}

impl Default for RandomGraphParams {
    fn default() -> Self {
        RandomGraphParams {
            max_nodes: 12,
            tree: true,
            max_parents: 3,
            max_multiplier: 1,
            parallel_prob: 0.4,
            interior_entry_prob: 0.0,
        }
    }
}

/// A random valid graph rooted at `n0`, plus a nominal local RT per function.
/// Node `i` only calls nodes with larger indices, so the result is acyclic.
pub fn random_graph(p: &RandomGraphParams, seed: u64) -> Result<(AppGraph, BTreeMap<String, f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=p.max_nodes.max(1));
    let name = |i: usize| format!("n{i}");
    let mut callers: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, c) in callers.iter_mut().enumerate().skip(1) {
        let k = if p.tree { 1 } else { rng.random_range(1..=p.max_parents.clamp(1, i)) };
        let mut pool: Vec<usize> = (0..i).collect();
        pool.shuffle(&mut rng);
        c.extend(pool.into_iter().take(k));
        c.sort_unstable();
    }
    let mut callees: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (child, ps) in callers.iter().enumerate() {
        for &parent in ps {
            callees[parent].push(child);
        }
    }
    let mut edges = Vec::new();
    for (parent, kids) in callees.iter().enumerate() {
        let mut group_id = 0;
        for (k, &child) in kids.iter().enumerate() {
            if k == 0 || !rng.random_bool(p.parallel_prob.clamp(0.0, 1.0)) {
                group_id += 1;
            }
            let m = rng.random_range(1..=p.max_multiplier.max(1));
            edges.push(DependencyEdge::new(name(parent), name(child), group_id, m));
        }
    }
    let functions = (0..n)
        .map(|i| {
            if i == 0 {
                FunctionSpec::entrypoint(name(i), Some(rng.random_range(50.0..500.0)))
            } else if rng.random_bool(p.interior_entry_prob.clamp(0.0, 1.0)) {
                FunctionSpec::entrypoint(name(i), Some(rng.random_range(5.0..500.0)))
            } else {
                FunctionSpec::internal(name(i), None)
            }
        })
        .collect();
    let graph = build_graph(functions, edges)?;
    let nlrt = (0..n).map(|i| (name(i), rng.random_range(0.5..50.0))).collect();
    Ok((graph, nlrt))
}
