//! Nominal (quiescent) response times.

use std::collections::BTreeMap;

use crate::dag::AppGraph;
use crate::error::{Error, Result};
use crate::perf::{InstanceState, PerfParams, REFERENCE_MILLICORES};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NominalEntry {
    pub nlrt_ms: f64,
    pub nrt_ms: f64,
}

/// Nominal local and total response times, aligned with a graph's function indices.
#[derive(Debug, Clone, PartialEq)]
pub struct NominalProfile {
    names: Vec<String>,
    nlrt: Vec<f64>,
    nrt: Vec<f64>,
}

impl NominalProfile {
    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn nlrt(&self, i: usize) -> f64 {
        self.nlrt[i]
    }

    pub fn nrt(&self, i: usize) -> f64 {
        self.nrt[i]
    }

    pub fn get(&self, function: &str) -> Option<NominalEntry> {
        let i = self.names.iter().position(|n| n == function)?;
        Some(NominalEntry {
            nlrt_ms: self.nlrt[i],
            nrt_ms: self.nrt[i],
        })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, NominalEntry)> {
        self.names.iter().enumerate().map(|(i, n)| {
            (
                n.as_str(),
                NominalEntry {
                    nlrt_ms: self.nlrt[i],
                    nrt_ms: self.nrt[i],
                },
            )
        })
    }

    pub fn nlrt_map(&self) -> BTreeMap<String, f64> {
        self.names.iter().cloned().zip(self.nlrt.iter().copied()).collect()
    }
}

/// Composes nominal total response times from per-function nominal local ones.
pub fn compose_nominal(graph: &AppGraph, nlrt: &BTreeMap<String, f64>) -> Result<NominalProfile> {
    let mut local = Vec::with_capacity(graph.len());
    for f in graph.functions() {
        let v = *nlrt
            .get(&f.name)
            .ok_or_else(|| Error::MissingProfileEntry { function: f.name.clone() })?;
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidProfileEntry {
                function: f.name.clone(),
                value: v,
            });
        }
        local.push(v);
    }
    let nrt = graph.compose(&local);
    Ok(NominalProfile {
        names: graph.functions().iter().map(|f| f.name.clone()).collect(),
        nlrt: local,
        nrt,
    })
}

/// Measures each function in isolation, one request at a time, at the
/// reference allocation.
pub fn profile_via_simulation(
    graph: &AppGraph,
    perf: &PerfParams,
    warmup_requests: usize,
    sample_requests: usize,
) -> Result<BTreeMap<String, f64>> {
    profile_at(graph, perf, REFERENCE_MILLICORES, warmup_requests, sample_requests)
}

/// Same as [`profile_via_simulation`] with an explicit static allocation.
pub fn profile_at(
    graph: &AppGraph,
    perf: &PerfParams,
    millicores: u32,
    warmup_requests: usize,
    sample_requests: usize,
) -> Result<BTreeMap<String, f64>> {
    let samples = sample_requests.max(1);
    let mut out = BTreeMap::new();
    for f in graph.functions() {
        let params = perf.get(&f.name)?;
        params.validate(&f.name)?;
        let mut state = InstanceState::new(millicores);
        // One request in flight at a time: the instance never sees queueing,
        // so each request is modelled as a zero-load tick lasting its own service time.
        let service_s = params.demand_core_ms / f64::from(millicores);
        for _ in 0..warmup_requests {
            state.tick(params, 0.0, service_s);
        }
        let total: f64 = (0..samples).map(|_| state.tick(params, 0.0, service_s)).sum();
        out.insert(f.name.clone(), total / samples as f64);
    }
    Ok(out)
}
