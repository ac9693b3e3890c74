//! Applications and experiments shipped with the crate, addressed as `bundled:<name>`.

use crate::error::{Error, Result};

const APPS: &[(&str, &str, &str)] = &[
    (
        "hotel-reservation",
        include_str!("../bundles/hotel-reservation.json"),
        include_str!("../bundles/hotel-reservation.profile.json"),
    ),
    (
        "sockshop",
        include_str!("../bundles/sockshop.json"),
        include_str!("../bundles/sockshop.profile.json"),
    ),
    (
        "complex",
        include_str!("../bundles/complex.json"),
        include_str!("../bundles/complex.profile.json"),
    ),
    (
        "example",
        include_str!("../bundles/example.json"),
        include_str!("../bundles/example.profile.json"),
    ),
];

const EXPERIMENTS: &[(&str, &str)] = &[
    ("hotel-no-bottleneck", include_str!("../bundles/experiments/hotel-no-bottleneck.json")),
    ("hotel-bottleneck", include_str!("../bundles/experiments/hotel-bottleneck.json")),
    ("sockshop-no-bottleneck", include_str!("../bundles/experiments/sockshop-no-bottleneck.json")),
    ("sockshop-bottleneck", include_str!("../bundles/experiments/sockshop-bottleneck.json")),
    ("complex-no-bottleneck", include_str!("../bundles/experiments/complex-no-bottleneck.json")),
    ("complex-bottleneck", include_str!("../bundles/experiments/complex-bottleneck.json")),
    ("example", include_str!("../bundles/experiments/example.json")),
];

fn unknown(kind: &str, name: &str) -> Error {
    Error::InvalidConfig(format!("no bundled {kind} named '{name}'"))
}

pub fn app_names() -> impl Iterator<Item = &'static str> {
    APPS.iter().map(|a| a.0)
}

pub fn experiment_names() -> impl Iterator<Item = &'static str> {
    EXPERIMENTS.iter().map(|e| e.0)
}

pub fn app(name: &str) -> Result<&'static str> {
    APPS.iter().find(|a| a.0 == name).map(|a| a.1).ok_or_else(|| unknown("app", name))
}

pub fn profile(name: &str) -> Result<&'static str> {
    APPS.iter().find(|a| a.0 == name).map(|a| a.2).ok_or_else(|| unknown("profile", name))
}

pub fn experiment(name: &str) -> Result<&'static str> {
    EXPERIMENTS
        .iter()
        .find(|e| e.0 == name)
        .map(|e| e.1)
        .ok_or_else(|| unknown("experiment", name))
}
