//! Decomposition of user SLAs into per-function set points.
//!
//! An entrypoint with an SLA starts from `sp = α·SLA`. Walking the graph top
//! down, every function splits its set point between its own code
//! (`lsp_i = sp_i · nlrt_i / nrt_i`) and each callee
//! (`sp_j = sp_i / m_ij · nrt_j / nrt_i`). Members of a parallel group are then
//! slowed down to the slowest member, and a function that receives several
//! targets keeps the tightest one.

use std::collections::BTreeMap;
use std::fmt;

use crate::dag::AppGraph;
use crate::error::{Error, Result};
use crate::profile::NominalProfile;

/// Where a function's set point came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SetPointSource {
    UserSla,
    Propagated,
    ParallelMaxRaised,
    MultiParentMin,
}

impl SetPointSource {
    pub fn as_str(self) -> &'static str {
        match self {
            SetPointSource::UserSla => "user-SLA",
            SetPointSource::Propagated => "propagated",
            SetPointSource::ParallelMaxRaised => "parallel-max-raised",
            SetPointSource::MultiParentMin => "multi-parent-min",
        }
    }
}

impl fmt::Display for SetPointSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SetPoint {
    pub sp_ms: f64,
    pub lsp_ms: f64,
    pub source: SetPointSource,
}

/// Set points aligned with a graph's function indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SetPointTable {
    pub alpha: f64,
    names: Vec<String>,
    entries: Vec<SetPoint>,
}

impl SetPointTable {
    pub fn at(&self, i: usize) -> &SetPoint {
        &self.entries[i]
    }

    pub fn get(&self, function: &str) -> Option<&SetPoint> {
        self.names.iter().position(|n| n == function).map(|i| &self.entries[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &SetPoint)> {
        self.names.iter().map(String::as_str).zip(self.entries.iter())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn validate_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidAlpha(alpha))
    }
}

/// `α·SLA`.
pub fn entry_set_point(sla_ms: f64, alpha: f64) -> Result<f64> {
    validate_alpha(alpha)?;
    Ok(alpha * sla_ms)
}

/// SLAs of all entrypoints that declare one.
pub fn entry_slas(graph: &AppGraph) -> BTreeMap<String, f64> {
    graph
        .functions()
        .iter()
        .filter(|f| f.is_entrypoint)
        .filter_map(|f| f.sla_ms.map(|s| (f.name.clone(), s)))
        .collect()
}

#[derive(Clone, Copy)]
struct Candidate {
    value: f64,
    source: SetPointSource,
}

pub fn propagate(
    graph: &AppGraph,
    profile: &NominalProfile,
    slas: &BTreeMap<String, f64>,
    alpha: f64,
) -> Result<SetPointTable> {
    validate_alpha(alpha)?;
    if let Some(f) = (0..graph.len()).find(|&i| profile.len() <= i || profile.name(i) != graph.name(i)) {
        return Err(Error::MissingProfileEntry {
            function: graph.name(f).to_string(),
        });
    }

    let mut candidates: Vec<Vec<Candidate>> = vec![Vec::new(); graph.len()];
    for (name, &sla) in slas {
        let i = graph.index_of(name)?;
        if !graph.function(i).is_entrypoint {
            return Err(Error::NotAnEntrypoint { function: name.clone() });
        }
        if !(sla.is_finite() && sla > 0.0) {
            return Err(Error::InvalidSla {
                function: name.clone(),
                value: sla,
            });
        }
        candidates[i].push(Candidate {
            value: alpha * sla,
            source: SetPointSource::UserSla,
        });
    }

    let mut entries: Vec<Option<SetPoint>> = vec![None; graph.len()];
    for &i in graph.topo_indices() {
        let name = graph.name(i);
        let sp = match candidates[i].as_slice() {
            [] => return Err(Error::MissingSla { function: name.to_string() }),
            [only] => *only,
            many => Candidate {
                value: many.iter().map(|c| c.value).fold(f64::INFINITY, f64::min),
                source: SetPointSource::MultiParentMin,
            },
        };
        if !(sp.value.is_finite() && sp.value > 0.0) {
            return Err(Error::NonPositiveSetPoint { function: name.to_string() });
        }
        let nrt_i = profile.nrt(i);
        let lsp = sp.value * profile.nlrt(i) / nrt_i;
        entries[i] = Some(SetPoint {
            sp_ms: sp.value,
            lsp_ms: lsp,
            source: sp.source,
        });

        for group in graph.groups_of(i) {
            let raw: Vec<f64> = group
                .members
                .iter()
                .map(|&(j, m)| sp.value / f64::from(m) * profile.nrt(j) / nrt_i)
                .collect();
            if !group.is_parallel() {
                let (j, _) = group.members[0];
                candidates[j].push(Candidate {
                    value: raw[0],
                    source: SetPointSource::Propagated,
                });
                continue;
            }
            // Equalize the per-call completion time m·sp across the group at
            // the slowest member's value. With m = 1 this raises every set
            // point to the group maximum.
            let slowest = group
                .members
                .iter()
                .zip(&raw)
                .map(|(&(_, m), &v)| f64::from(m) * v)
                .fold(f64::NEG_INFINITY, f64::max);
            for (&(j, m), &v) in group.members.iter().zip(&raw) {
                let raised = slowest / f64::from(m);
                let source = if raised > v {
                    SetPointSource::ParallelMaxRaised
                } else {
                    SetPointSource::Propagated
                };
                candidates[j].push(Candidate {
                    value: raised.max(v),
                    source,
                });
            }
        }
    }

    Ok(SetPointTable {
        alpha,
        names: graph.functions().iter().map(|f| f.name.clone()).collect(),
        entries: entries.into_iter().map(|e| e.expect("every function visited")).collect(),
    })
}

/// Composed response-time budget of `f` if every controller met its local set point.
pub fn composed_target(graph: &AppGraph, table: &SetPointTable, f: &str) -> Result<f64> {
    let i = graph.index_of(f)?;
    Ok(composed_targets(graph, table)[i])
}

pub fn composed_targets(graph: &AppGraph, table: &SetPointTable) -> Vec<f64> {
    let local: Vec<f64> = (0..graph.len()).map(|i| table.at(i).lsp_ms).collect();
    graph.compose(&local)
}
