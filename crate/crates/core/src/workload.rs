//! User request rates per entrypoint.
//!
//! Step workloads draw their level for interval `k = floor(t / period)` from
//! word position `2k` of a ChaCha8 stream (`ChaCha8Rng::seed_from_u64(seed)`
//! on stream `stream`), so any time point can be evaluated without replaying
//! earlier draws. The 64-bit word is mapped to `[0, 1)` through its top 53
//! bits and then scaled linearly into `[low, high]`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WorkloadShape {
    Ramp {
        start_rps: f64,
        increment_rps_per_s: f64,
        max_rps: f64,
    },
    Step {
        period_s: f64,
        low_rps: f64,
        high_rps: f64,
    },
    BottleneckStep {
        period_s: f64,
        low_rps: f64,
        high_rps: f64,
    },
    Constant {
        rps: f64,
    },
}

impl WorkloadShape {
    pub fn kind(&self) -> &'static str {
        match self {
            WorkloadShape::Ramp { .. } => "ramp",
            WorkloadShape::Step { .. } => "step",
            WorkloadShape::BottleneckStep { .. } => "bottleneck_step",
            WorkloadShape::Constant { .. } => "constant",
        }
    }

    /// Ramp from 10 to 100 rps adding one per second.
    pub fn default_ramp() -> Self {
        WorkloadShape::Ramp {
            start_rps: 10.0,
            increment_rps_per_s: 1.0,
            max_rps: 100.0,
        }
    }

    /// Random levels in [20, 120] rps, redrawn every 50 s.
    pub fn default_step() -> Self {
        WorkloadShape::Step {
            period_s: 50.0,
            low_rps: 20.0,
            high_rps: 120.0,
        }
    }

    /// Random levels in [800, 6000] rps, redrawn every 50 s.
    pub fn default_bottleneck() -> Self {
        WorkloadShape::BottleneckStep {
            period_s: 50.0,
            low_rps: 800.0,
            high_rps: 6000.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkloadSpec {
    pub shape: WorkloadShape,
    pub seed: u64,
    pub stream: u64,
}

impl WorkloadSpec {
    pub fn new(shape: WorkloadShape, seed: u64) -> Self {
        WorkloadSpec { shape, seed, stream: 0 }
    }

    /// The same workload re-keyed for one replication: the replication seed
    /// becomes the generator key and the configured seed selects the stream.
    pub fn for_replication(&self, replication_seed: u64) -> Self {
        WorkloadSpec {
            shape: self.shape,
            seed: replication_seed,
            stream: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidWorkload(msg));
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        match self.shape {
            WorkloadShape::Ramp {
                start_rps,
                increment_rps_per_s,
                max_rps,
            } => {
                if !(nonneg(start_rps) && increment_rps_per_s.is_finite() && nonneg(max_rps)) {
                    return bad(format!("ramp rates must be finite and >= 0: {:?}", self.shape));
                }
            }
            WorkloadShape::Step {
                period_s,
                low_rps,
                high_rps,
            }
            | WorkloadShape::BottleneckStep {
                period_s,
                low_rps,
                high_rps,
            } => {
                if !(period_s.is_finite() && period_s > 0.0) {
                    return bad(format!("period_s must be > 0, got {period_s}"));
                }
                if !(nonneg(low_rps) && nonneg(high_rps) && low_rps <= high_rps) {
                    return bad(format!("need 0 <= low_rps <= high_rps, got {low_rps}..{high_rps}"));
                }
            }
            WorkloadShape::Constant { rps } => {
                if !nonneg(rps) {
                    return bad(format!("constant rate must be >= 0, got {rps}"));
                }
            }
        }
        Ok(())
    }

    /// Inclusive bounds of every value `rate_at` can return.
    pub fn range(&self) -> (f64, f64) {
        match self.shape {
            WorkloadShape::Ramp {
                start_rps, max_rps, ..
            } => (start_rps.min(max_rps), start_rps.max(max_rps)),
            WorkloadShape::Step { low_rps, high_rps, .. } | WorkloadShape::BottleneckStep { low_rps, high_rps, .. } => {
                (low_rps, high_rps)
            }
            WorkloadShape::Constant { rps } => (rps, rps),
        }
    }
}

/// Uniform draw in `[0, 1)` at word position `2·index` of the keyed stream.
pub fn unit_draw(seed: u64, stream: u64, index: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(u128::from(index) * 2);
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Requests per second at time `t_s` (seconds since start).
pub fn rate_at(spec: &WorkloadSpec, t_s: f64) -> f64 {
    let t = t_s.max(0.0);
    match spec.shape {
        WorkloadShape::Ramp {
            start_rps,
            increment_rps_per_s,
            max_rps,
        } => {
            let r = start_rps + increment_rps_per_s * t.floor();
            if increment_rps_per_s >= 0.0 {
                r.min(max_rps)
            } else {
                r.max(max_rps)
            }
        }
        WorkloadShape::Step {
            period_s,
            low_rps,
            high_rps,
        }
        | WorkloadShape::BottleneckStep {
            period_s,
            low_rps,
            high_rps,
        } => {
            let interval = (t / period_s).floor() as u64;
            let u = unit_draw(spec.seed, spec.stream, interval);
            (low_rps + u * (high_rps - low_rps)).clamp(low_rps, high_rps)
        }
        WorkloadShape::Constant { rps } => rps,
    }
}

/// Memoizes the current step level so per-tick evaluation avoids reseeding.
#[derive(Debug, Clone)]
pub struct WorkloadCursor {
    spec: WorkloadSpec,
    cached: Option<(u64, f64)>,
}

impl WorkloadCursor {
    pub fn new(spec: WorkloadSpec) -> Self {
        WorkloadCursor { spec, cached: None }
    }

    pub fn rate_at(&mut self, t_s: f64) -> f64 {
        match self.spec.shape {
            WorkloadShape::Step { period_s, .. } | WorkloadShape::BottleneckStep { period_s, .. } => {
                let interval = (t_s.max(0.0) / period_s).floor() as u64;
                match self.cached {
                    Some((k, v)) if k == interval => v,
                    _ => {
                        let v = rate_at(&self.spec, t_s);
                        self.cached = Some((interval, v));
                        v
                    }
                }
            }
            _ => rate_at(&self.spec, t_s),
        }
    }
}
