//! Per-step timing across ambient dimensions.
//!
//! Each dimension gets a fresh tracker fed a pre-generated static stream;
//! the clock wraps only the update call, warmup steps are discarded, and
//! the reported figure is the median so scheduler noise cannot skew it.

use std::time::Instant;

use grouse_core::{
    GenerativeModel, GrouseTracker, SamplingKind, SamplingModel, StepSchedule, SubspaceMotion,
    TrackerConfig,
};

use crate::error::{CliError, Result};

/// Median time per update at one ambient dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchPoint {
    pub n: usize,
    pub median_ns: f64,
}

/// Times the tracker update at each dimension in `ns` and reports median
/// nanoseconds per step.
pub fn bench_linear_scaling(
    d: usize,
    ns: &[usize],
    density: f64,
    steps: u64,
    warmup: u64,
    seed: u64,
) -> Result<Vec<BenchPoint>> {
    if ns.len() < 3 || ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::config(
            "bench_ns",
            "need at least 3 strictly increasing dimensions",
        ));
    }
    if steps < 1000 {
        return Err(CliError::config(
            "bench_steps",
            "timing needs at least 1000 measured steps",
        ));
    }

    let mut points = Vec::with_capacity(ns.len());
    for &n in ns {
        let mut model = GenerativeModel::new(SubspaceMotion::Static, n, d, 0.0, seed)?;
        let sampler = SamplingModel::new(SamplingKind::FixedSize, density, seed ^ 0x6d61_736b)?;
        let config = TrackerConfig {
            schedule: StepSchedule::Constant { c: 0.05 },
            ..TrackerConfig::default()
        };
        let mut tracker = GrouseTracker::new(n, d, seed ^ 0x696e_6974, config)?;

        // Materialize every observation first so generation and masking
        // never sit inside the timed region.
        let total = warmup + steps;
        let mut observations = Vec::with_capacity(total as usize);
        for t in 0..total {
            let vector = model.next_vector();
            let mask = sampler.draw_mask(n, t)?;
            observations.push(grouse_core::MaskedVector::from_dense(&vector, mask)?);
        }

        let mut timings = Vec::with_capacity(steps as usize);
        for (k, obs) in observations.iter().enumerate() {
            let clock = Instant::now();
            tracker.step(obs)?;
            let elapsed = clock.elapsed().as_nanos() as u64;
            if (k as u64) >= warmup {
                timings.push(elapsed);
            }
        }

        timings.sort_unstable();
        let mid = timings.len() / 2;
        let median_ns = if timings.len() % 2 == 1 {
            timings[mid] as f64
        } else {
            (timings[mid - 1] as f64 + timings[mid] as f64) / 2.0
        };
        points.push(BenchPoint { n, median_ns });
    }
    Ok(points)
}
