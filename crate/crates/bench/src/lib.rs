//! Shared fixtures for the benchmarks.

use std::path::Path;

use depscale_core::config::ExperimentFile;
use depscale_core::{bundles, Scenario};

/// A bundled experiment, shortened to `duration_s` and one replication.
pub fn bundled_scenario(name: &str, duration_s: f64) -> Scenario {
    let mut s = ExperimentFile::from_json(bundles::experiment(name).expect("bundled experiment"), Path::new("."))
        .expect("bundled experiments resolve")
        .scenario;
    s.sim.duration_s = duration_s;
    s.sim.replications = 1;
    s
}
