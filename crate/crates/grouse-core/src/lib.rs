//! Streaming estimation of a low-dimensional subspace from vectors observed
//! only on a few coordinates at a time, with a matrix-completion driver
//! built on top.
//!
//! The tracker keeps an orthonormal `n x d` basis and revises it with a
//! cheap rank-one geodesic rotation per incoming vector, so it handles
//! streams whose generating subspace is fixed, switches abruptly, or drifts
//! continuously. Feeding the columns of a partially observed matrix through
//! the same tracker yields an online matrix-completion method.
//!
//! Module map:
//! - [`linalg`]: masked least squares, orthonormalization, the
//!   skew-symmetric matrix exponential, and the span-distance metric.
//! - [`engine`]: the tracker itself, its step-size schedules, and per-step
//!   telemetry.
//! - [`streamgen`]: seeded synthetic streams (static, switching, rotating
//!   subspaces) and observation masks.
//! - [`completion`]: column-streaming matrix completion and its baselines.
//!
//! ```
//! use grouse_core::{
//!     GenerativeModel, GrouseTracker, MaskedVector, SamplingKind, SamplingModel,
//!     StepSchedule, SubspaceMotion, TrackerConfig,
//! };
//!
//! let mut stream = GenerativeModel::new(SubspaceMotion::Static, 60, 3, 0.0, 7).unwrap();
//! let masks = SamplingModel::new(SamplingKind::FixedSize, 0.4, 8).unwrap();
//! let config = TrackerConfig {
//!     schedule: StepSchedule::Diminishing { c: 20.0 },
//!     ..TrackerConfig::default()
//! };
//! let mut tracker = GrouseTracker::new(60, 3, 9, config).unwrap();
//! for t in 1..=2000 {
//!     let v = stream.next_vector();
//!     let mask = masks.draw_mask(60, t).unwrap();
//!     let obs = MaskedVector::from_dense(&v, mask).unwrap();
//!     tracker.step(&obs).unwrap();
//! }
//! let err = grouse_core::subspace_error(tracker.basis(), stream.true_basis()).unwrap();
//! assert!(err < 1e-3);
//! ```

pub mod completion;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod streamgen;

pub use completion::{
    relative_error, solve_completion, svd_baseline_error, CompletionProblem, CompletionResult,
};
pub use engine::{
    masked_cost, GrouseTracker, RankPolicy, SkipReason, StepSchedule, TrackerConfig, UpdateReport,
};
pub use error::{Error, Result};
pub use linalg::{
    expm_skew, masked_least_squares, orthonormality_defect, orthonormalize, subspace_error,
    IndexSet, MaskedLsq, MaskedVector, ORTHONORMALITY_TOLERANCE, RANK_TOLERANCE,
};
pub use streamgen::{
    planted_subspace, GenerativeModel, SamplingKind, SamplingModel, SubspaceMotion,
    ROTATION_REFRESH_INTERVAL,
};
