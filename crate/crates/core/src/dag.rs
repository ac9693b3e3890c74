//! Annotated dependency DAGs.
//!
//! Edges carry an invocation-group identifier and a multiplier. Out-edges of
//! one function that share a group id are invoked in parallel; a group with a
//! single member is a sequential invocation. Group ids are only compared among
//! edges with the same source.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionSpec {
    pub name: String,
    pub sla_ms: Option<f64>,
    pub is_entrypoint: bool,
}

impl FunctionSpec {
    pub fn entrypoint(name: impl Into<String>, sla_ms: Option<f64>) -> Self {
        FunctionSpec {
            name: name.into(),
            sla_ms,
            is_entrypoint: true,
        }
    }

    pub fn internal(name: impl Into<String>, sla_ms: Option<f64>) -> Self {
        FunctionSpec {
            name: name.into(),
            sla_ms,
            is_entrypoint: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyEdge {
    pub source: String,
    pub target: String,
    pub group_id: u32,
    pub multiplier: u32,
}

impl DependencyEdge {
    pub fn new(source: impl Into<String>, target: impl Into<String>, group_id: u32, multiplier: u32) -> Self {
        DependencyEdge {
            source: source.into(),
            target: target.into(),
            group_id,
            multiplier,
        }
    }
}

/// One invocation group of a function, children referenced by index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexedGroup {
    pub group_id: u32,
    /// `(child index, multiplier)`, ordered by child name.
    pub members: Vec<(usize, u32)>,
}

impl IndexedGroup {
    pub fn is_parallel(&self) -> bool {
        self.members.len() > 1
    }
}

/// One invocation group with children referenced by name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvocationGroup {
    pub group_id: u32,
    pub members: Vec<(String, u32)>,
}

/// A validated, immutable application graph.
#[derive(Debug, Clone, PartialEq)]
pub struct AppGraph {
    functions: Vec<FunctionSpec>,
    edges: Vec<DependencyEdge>,
    index: BTreeMap<String, usize>,
    topo: Vec<usize>,
    groups: Vec<Vec<IndexedGroup>>,
    incoming: Vec<Vec<usize>>,
}

/// Validates `functions` and `edges` and returns the graph.
pub fn build_graph(functions: Vec<FunctionSpec>, edges: Vec<DependencyEdge>) -> Result<AppGraph> {
    let mut index = BTreeMap::new();
    for (i, f) in functions.iter().enumerate() {
        if index.insert(f.name.clone(), i).is_some() {
            return Err(Error::DuplicateName { name: f.name.clone() });
        }
        if let Some(sla) = f.sla_ms {
            if !(sla.is_finite() && sla > 0.0) {
                return Err(Error::InvalidSla {
                    function: f.name.clone(),
                    value: sla,
                });
            }
        }
    }

    let lookup = |name: &str| {
        index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownFunction { name: name.to_string() })
    };

    let n = functions.len();
    let mut out_edges: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut seen = BTreeSet::new();
    for (e, edge) in edges.iter().enumerate() {
        let s = lookup(&edge.source)?;
        let t = lookup(&edge.target)?;
        if s == t {
            return Err(Error::CycleDetected {
                cycle: vec![edge.source.clone(), edge.target.clone()],
            });
        }
        if edge.multiplier == 0 {
            return Err(Error::InvalidMultiplier {
                source_fn: edge.source.clone(),
                target: edge.target.clone(),
            });
        }
        if !seen.insert((s, t, edge.group_id)) {
            return Err(Error::DuplicateEdge {
                source_fn: edge.source.clone(),
                target: edge.target.clone(),
                group_id: edge.group_id,
            });
        }
        out_edges[s].push(e);
        incoming[t].push(e);
    }

    let topo = kahn_order(&functions, &edges, &index, &out_edges, &incoming)?;

    for (i, f) in functions.iter().enumerate() {
        if incoming[i].is_empty() {
            if !f.is_entrypoint {
                return Err(Error::UnreachableFunction { function: f.name.clone() });
            }
            if f.sla_ms.is_none() {
                return Err(Error::MissingSla { function: f.name.clone() });
            }
        }
    }

    let groups = out_edges
        .iter()
        .map(|es| {
            let mut by_id: BTreeMap<u32, Vec<(usize, u32)>> = BTreeMap::new();
            for &e in es {
                let edge = &edges[e];
                by_id
                    .entry(edge.group_id)
                    .or_default()
                    .push((index[&edge.target], edge.multiplier));
            }
            by_id
                .into_iter()
                .map(|(group_id, mut members)| {
                    members.sort_by(|a, b| functions[a.0].name.cmp(&functions[b.0].name));
                    IndexedGroup { group_id, members }
                })
                .collect()
        })
        .collect();

    for list in &mut incoming {
        list.sort_by(|&a, &b| {
            (&edges[a].source, edges[a].group_id).cmp(&(&edges[b].source, edges[b].group_id))
        });
    }

    Ok(AppGraph {
        functions,
        edges,
        index,
        topo,
        groups,
        incoming,
    })
}

/// Kahn's algorithm with a lexicographic ready set. On failure, extracts one
/// cycle from the nodes that never became ready.
fn kahn_order(
    functions: &[FunctionSpec],
    edges: &[DependencyEdge],
    index: &BTreeMap<String, usize>,
    out_edges: &[Vec<usize>],
    incoming: &[Vec<usize>],
) -> Result<Vec<usize>> {
    let n = functions.len();
    let mut indeg: Vec<usize> = incoming.iter().map(Vec::len).collect();
    let mut ready: BTreeSet<(&str, usize)> = (0..n)
        .filter(|&i| indeg[i] == 0)
        .map(|i| (functions[i].name.as_str(), i))
        .collect();
    let mut order = Vec::with_capacity(n);
    while let Some(first) = ready.pop_first() {
        let i = first.1;
        order.push(i);
        for &e in &out_edges[i] {
            let t = index[&edges[e].target];
            indeg[t] -= 1;
            if indeg[t] == 0 {
                ready.insert((functions[t].name.as_str(), t));
            }
        }
    }
    if order.len() == n {
        return Ok(order);
    }

    // Every remaining node has a remaining predecessor, so walking backwards
    // must revisit a node.
    let start = (0..n).find(|&i| indeg[i] > 0).expect("unfinished node");
    let mut path = vec![start];
    let mut pos: BTreeMap<usize, usize> = BTreeMap::from([(start, 0)]);
    let mut cur = start;
    loop {
        let pred = incoming[cur]
            .iter()
            .map(|&e| index[&edges[e].source])
            .find(|&p| indeg[p] > 0)
            .expect("remaining node has a remaining predecessor");
        if let Some(&at) = pos.get(&pred) {
            let mut cycle: Vec<String> = path[at..].iter().rev().map(|&i| functions[i].name.clone()).collect();
            let smallest = (0..cycle.len()).min_by(|&a, &b| cycle[a].cmp(&cycle[b])).unwrap_or(0);
            cycle.rotate_left(smallest);
            cycle.push(cycle[0].clone());
            return Err(Error::CycleDetected { cycle });
        }
        pos.insert(pred, path.len());
        path.push(pred);
        cur = pred;
    }
}

impl AppGraph {
    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn functions(&self) -> &[FunctionSpec] {
        &self.functions
    }

    pub fn edges(&self) -> &[DependencyEdge] {
        &self.edges
    }

    pub fn function(&self, i: usize) -> &FunctionSpec {
        &self.functions[i]
    }

    pub fn name(&self, i: usize) -> &str {
        &self.functions[i].name
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownFunction { name: name.to_string() })
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    /// Function indices, every edge source before its target, ties broken by name.
    pub fn topo_indices(&self) -> &[usize] {
        &self.topo
    }

    pub fn groups_of(&self, i: usize) -> &[IndexedGroup] {
        &self.groups[i]
    }

    pub fn incoming_of(&self, i: usize) -> impl Iterator<Item = &DependencyEdge> {
        self.incoming[i].iter().map(|&e| &self.edges[e])
    }

    pub fn is_leaf(&self, i: usize) -> bool {
        self.groups[i].is_empty()
    }

    pub fn has_callers(&self, i: usize) -> bool {
        !self.incoming[i].is_empty()
    }

    /// Entrypoints that nobody else calls; they must carry an SLA.
    pub fn user_only_entrypoints(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.functions[i].is_entrypoint && !self.has_callers(i))
    }

    /// Bottom-up composition of response times:
    /// `total_i = local_i + Σ_seq m·total_j + Σ_groups max(m·total_j)`.
    pub fn compose(&self, local: &[f64]) -> Vec<f64> {
        debug_assert_eq!(local.len(), self.len());
        let mut total = vec![0.0; self.len()];
        for &i in self.topo.iter().rev() {
            let mut t = local[i];
            for g in &self.groups[i] {
                t += g
                    .members
                    .iter()
                    .map(|&(j, m)| f64::from(m) * total[j])
                    .fold(f64::NEG_INFINITY, f64::max);
            }
            total[i] = t;
        }
        total
    }

    /// Per-function request rates: `r_i = direct_i + Σ_{j→i} m_{j,i}·r_j`.
    pub fn fan_out(&self, direct: &[f64]) -> Vec<f64> {
        debug_assert_eq!(direct.len(), self.len());
        let mut rates = direct.to_vec();
        for &i in &self.topo {
            let r = rates[i];
            if r == 0.0 {
                continue;
            }
            for g in &self.groups[i] {
                for &(j, m) in &g.members {
                    rates[j] += f64::from(m) * r;
                }
            }
        }
        rates
    }
}

pub fn topological_order(graph: &AppGraph) -> Vec<String> {
    graph.topo.iter().map(|&i| graph.functions[i].name.clone()).collect()
}

/// Out-edges of `f` partitioned by group id, ascending.
pub fn invocation_groups(graph: &AppGraph, f: &str) -> Result<Vec<InvocationGroup>> {
    let i = graph.index_of(f)?;
    Ok(graph.groups[i]
        .iter()
        .map(|g| InvocationGroup {
            group_id: g.group_id,
            members: g
                .members
                .iter()
                .map(|&(j, m)| (graph.functions[j].name.clone(), m))
                .collect(),
        })
        .collect())
}

/// Edges whose target is `f`, ordered by (source, group id).
pub fn incoming_edges(graph: &AppGraph, f: &str) -> Result<Vec<DependencyEdge>> {
    let i = graph.index_of(f)?;
    Ok(graph.incoming_of(i).cloned().collect())
}
