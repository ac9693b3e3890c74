use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dependency cycle detected: {}", .cycle.join(" -> "))]
    CycleDetected { cycle: Vec<String> },

    #[error("unknown function '{name}'")]
    UnknownFunction { name: String },

    #[error("function '{function}' has no SLA to derive a set point from")]
    MissingSla { function: String },

    #[error("function '{function}' is not an entrypoint and has no callers")]
    UnreachableFunction { function: String },

    #[error("duplicate function name '{name}'")]
    DuplicateName { name: String },

    #[error("edge {source_fn} -> {target} has multiplier 0 (must be >= 1)")]
    InvalidMultiplier { source_fn: String, target: String },

    #[error("duplicate edge {source_fn} -> {target} with group id {group_id}")]
    DuplicateEdge {
        source_fn: String,
        target: String,
        group_id: u32,
    },

    #[error("function '{function}' has invalid SLA {value} ms (must be finite and > 0)")]
    InvalidSla { function: String, value: f64 },

    #[error("SLA given for '{function}', which is not an entrypoint")]
    NotAnEntrypoint { function: String },

    #[error("no nominal profile entry for function '{function}'")]
    MissingProfileEntry { function: String },

    #[error("nominal local response time of '{function}' must be finite and > 0, got {value}")]
    InvalidProfileEntry { function: String, value: f64 },

    #[error("alpha must lie in (0, 1], got {0}")]
    InvalidAlpha(f64),

    #[error("set point propagation produced a non-positive value for '{function}'")]
    NonPositiveSetPoint { function: String },

    #[error("measured response time must be > 0, got {value}")]
    NonPositiveMeasurement { value: f64 },

    #[error("no performance parameters for function '{function}'")]
    MissingPerfEntry { function: String },

    #[error("invalid performance parameters for '{function}': {reason}")]
    InvalidPerfParams { function: String, reason: String },

    #[error("invalid workload: {0}")]
    InvalidWorkload(String),

    #[error("invalid controller configuration: {0}")]
    InvalidController(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cannot summarize an empty series")]
    EmptySeries,

    #[error("result sets are not comparable: {0}")]
    GridMismatch(String),

    #[error("infeasible synthetic shape: {0}")]
    InfeasibleShape(String),

    #[error("simulation failed at tick {tick} (function '{function}'): {source}")]
    Simulation {
        tick: u64,
        function: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", .path.display())]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Input problems (bad graphs, bad configs) as opposed to failures while running.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::Simulation { .. }
                | Error::Io { .. }
                | Error::Csv(_)
                | Error::NonPositiveMeasurement { .. }
        )
    }

    /// Stable machine-readable tag used in CLI diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::CycleDetected { .. } => "CycleDetected",
            Error::UnknownFunction { .. } => "UnknownFunction",
            Error::MissingSla { .. } => "MissingSla",
            Error::UnreachableFunction { .. } => "UnreachableFunction",
            Error::DuplicateName { .. } => "DuplicateName",
            Error::InvalidMultiplier { .. } => "InvalidMultiplier",
            Error::DuplicateEdge { .. } => "DuplicateEdge",
            Error::InvalidSla { .. } => "InvalidSla",
            Error::NotAnEntrypoint { .. } => "NotAnEntrypoint",
            Error::MissingProfileEntry { .. } => "MissingProfileEntry",
            Error::InvalidProfileEntry { .. } => "InvalidProfileEntry",
            Error::InvalidAlpha(_) => "InvalidAlpha",
            Error::NonPositiveSetPoint { .. } => "NonPositiveSetPoint",
            Error::NonPositiveMeasurement { .. } => "NonPositiveMeasurement",
            Error::MissingPerfEntry { .. } => "MissingPerfEntry",
            Error::InvalidPerfParams { .. } => "InvalidPerfParams",
            Error::InvalidWorkload(_) => "InvalidWorkload",
            Error::InvalidController(_) => "InvalidController",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::EmptySeries => "EmptySeries",
            Error::GridMismatch(_) => "GridMismatch",
            Error::InfeasibleShape(_) => "InfeasibleShape",
            Error::Simulation { .. } => "Simulation",
            Error::Io { .. } => "Io",
            Error::Parse { .. } | Error::Json(_) => "Parse",
            Error::Csv(_) => "Csv",
        }
    }
}
