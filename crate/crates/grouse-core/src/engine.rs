//! Streaming subspace tracker.
//!
//! The tracker maintains an orthonormal basis `U` (an `n x d` matrix) and
//! revises it from one partially observed vector at a time. Each step fits
//! coefficients `w` to the observed coordinates, splits the observation into
//! an in-span prediction `p = U w` and an off-span residual `r`, and moves
//! `U` along the geodesic that rotates `p / ||p||` toward the residual
//! direction by the angle `eta * sigma`, where `sigma = ||r|| * ||p||`. The
//! rotation touches only the rank-one plane spanned by `p` and `r`, so a step
//! costs `O(n d + |omega| d^2)` and the basis stays orthonormal to rounding
//! error without any re-orthogonalization.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{
    masked_least_squares, orthonormality_defect, orthonormalize, MaskedVector,
    ORTHONORMALITY_TOLERANCE,
};

/// Step-size rule mapping the 1-based step counter to `eta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    /// `eta = c / t`: converges on stationary streams, with early steps
    /// `c, c/2, c/3, ...` doing most of the work.
    Diminishing { c: f64 },
    /// `eta = c`: tracks drifting or switching streams at the price of a
    /// noise floor proportional to the step size.
    Constant { c: f64 },
}

impl StepSchedule {
    /// Step size for step `t` (1-based).
    pub fn eta_for_step(&self, t: u64) -> f64 {
        match *self {
            StepSchedule::Diminishing { c } => c / t as f64,
            StepSchedule::Constant { c } => c,
        }
    }

    fn c(&self) -> f64 {
        match *self {
            StepSchedule::Diminishing { c } | StepSchedule::Constant { c } => c,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.c();
        if !c.is_finite() || c <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "step schedule constant must be positive and finite, got {c}"
            )));
        }
        Ok(())
    }
}

/// What to do when the restricted basis `U_omega` is rank-deficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RankPolicy {
    /// Leave the basis unchanged for that step.
    #[default]
    Skip,
    /// Proceed with the minimum-norm coefficients.
    MinNorm,
}

/// Why a step left the basis unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipReason {
    /// The step updated the basis.
    None,
    /// Too few observed coordinates relative to the basis rank.
    TooFewSamples,
    /// Restricted basis was rank-deficient under [`RankPolicy::Skip`].
    RankDeficient,
    /// The rotation angle was negligible, so the update would be a no-op.
    NegligibleResidual,
}

/// Tracker configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub schedule: StepSchedule,
    /// A step is skipped when `|omega| <= min_samples_factor * d`.
    pub min_samples_factor: f64,
    /// A step is skipped when `sigma <= residual_tol * ||v_omega||`; this
    /// also covers the all-zero observation and the zero-coefficient case.
    pub residual_tol: f64,
    pub rank_policy: RankPolicy,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            schedule: StepSchedule::Diminishing { c: 1.0 },
            min_samples_factor: 1.0,
            residual_tol: 1e-14,
            rank_policy: RankPolicy::Skip,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if !self.min_samples_factor.is_finite() || self.min_samples_factor < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "min_samples_factor must be non-negative, got {}",
                self.min_samples_factor
            )));
        }
        if !self.residual_tol.is_finite() || self.residual_tol < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "residual_tol must be non-negative, got {}",
                self.residual_tol
            )));
        }
        Ok(())
    }
}

/// Per-step telemetry. For skipped steps the numeric fields other than
/// `observed_norm` and `eta` are zero (for [`SkipReason::TooFewSamples`]) or
/// reflect the fit that was computed before the skip decision.
#[derive(Debug, Clone)]
pub struct UpdateReport {
    /// Fitted coefficients `w`.
    pub weights: DVector<f64>,
    /// `||U w||`; equals `||w||` up to rounding while `U` is orthonormal.
    pub predicted_norm: f64,
    /// `||v_omega - U_omega w||`.
    pub residual_norm: f64,
    /// `||v_omega||`.
    pub observed_norm: f64,
    /// Rotation magnitude `||r|| * ||p||`.
    pub sigma: f64,
    /// Step size used (or that would have been used).
    pub eta: f64,
    /// True when the basis was left unchanged.
    pub skipped: bool,
    pub skip_reason: SkipReason,
}

impl UpdateReport {
    /// Fraction of observed energy the basis cannot explain:
    /// `||r|| / ||v_omega||`, or 0 when nothing was observed.
    pub fn residual_signal(&self) -> f64 {
        if self.observed_norm > 0.0 {
            self.residual_norm / self.observed_norm
        } else {
            0.0
        }
    }
}

/// Squared fit error of a (not necessarily orthonormal) basis against one
/// partial observation: `min_w ||U_omega w - v_omega||^2`. An empty support
/// has zero cost.
pub fn masked_cost(basis: &DMatrix<f64>, obs: &MaskedVector) -> Result<f64> {
    if obs.sample_count() == 0 {
        if obs.ambient_dim() != basis.nrows() {
            return Err(Error::DimensionMismatch {
                context: "masked cost observation",
                expected: basis.nrows(),
                actual: obs.ambient_dim(),
            });
        }
        return Ok(0.0);
    }
    Ok(masked_least_squares(basis, obs)?.residual.norm_squared())
}

/// Streaming subspace tracker state: the basis, a step counter, and the
/// configuration. The counter advances on every presented vector, skipped or
/// not, so diminishing schedules decay with stream position.
#[derive(Debug, Clone)]
pub struct GrouseTracker {
    basis: DMatrix<f64>,
    step_count: u64,
    config: TrackerConfig,
}

impl GrouseTracker {
    /// Fresh tracker with a random `n x d` orthonormal basis drawn from a
    /// seeded Gaussian. Identical `(n, d, seed, config)` give bitwise
    /// identical trackers.
    pub fn new(ambient_dim: usize, rank: usize, seed: u64, config: TrackerConfig) -> Result<Self> {
        if rank == 0 || rank > ambient_dim {
            return Err(Error::InvalidParameter(format!(
                "rank must satisfy 1 <= rank <= ambient dimension, got rank {rank} for dimension {ambient_dim}"
            )));
        }
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gaussian =
            DMatrix::from_fn(ambient_dim, rank, |_, _| StandardNormal.sample(&mut rng));
        // A Gaussian matrix is full rank with probability 1; a rank-deficient
        // draw would be rejected here.
        let basis = orthonormalize(&gaussian)?;
        Ok(Self {
            basis,
            step_count: 0,
            config,
        })
    }

    /// Tracker starting from a caller-supplied basis, which must already be
    /// orthonormal.
    pub fn from_basis(basis: DMatrix<f64>, config: TrackerConfig) -> Result<Self> {
        if basis.ncols() == 0 || basis.ncols() > basis.nrows() {
            return Err(Error::InvalidParameter(format!(
                "basis must be tall, got {}x{}",
                basis.nrows(),
                basis.ncols()
            )));
        }
        config.validate()?;
        let defect = orthonormality_defect(&basis);
        if defect > ORTHONORMALITY_TOLERANCE {
            return Err(Error::NotOrthonormal {
                context: "tracker initial basis",
                defect,
                tolerance: ORTHONORMALITY_TOLERANCE,
            });
        }
        Ok(Self {
            basis,
            step_count: 0,
            config,
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// Number of vectors presented so far, including skipped ones.
    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    /// Current Frobenius defect `||U^T U - I||_F`.
    pub fn orthonormality_defect(&self) -> f64 {
        orthonormality_defect(&self.basis)
    }

    /// Presents one partial observation and revises the basis in place.
    ///
    /// Always advances the step counter. Returns the telemetry for the step,
    /// including whether and why it was skipped.
    pub fn step(&mut self, obs: &MaskedVector) -> Result<UpdateReport> {
        if obs.ambient_dim() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                context: "tracker observation",
                expected: self.ambient_dim(),
                actual: obs.ambient_dim(),
            });
        }
        self.step_count += 1;
        let eta = self.config.schedule.eta_for_step(self.step_count);
        let d = self.rank();
        let observed_norm = obs.values().norm();

        if (obs.sample_count() as f64) <= self.config.min_samples_factor * d as f64 {
            return Ok(UpdateReport {
                weights: DVector::zeros(d),
                predicted_norm: 0.0,
                residual_norm: 0.0,
                observed_norm,
                sigma: 0.0,
                eta,
                skipped: true,
                skip_reason: SkipReason::TooFewSamples,
            });
        }

        let sol = masked_least_squares(&self.basis, obs)?;
        let prediction = &self.basis * &sol.weights;
        let predicted_norm = prediction.norm();
        let residual_norm = sol.residual.norm();
        let sigma = residual_norm * predicted_norm;

        if !sol.rank_ok && self.config.rank_policy == RankPolicy::Skip {
            return Ok(UpdateReport {
                weights: sol.weights,
                predicted_norm,
                residual_norm,
                observed_norm,
                sigma,
                eta,
                skipped: true,
                skip_reason: SkipReason::RankDeficient,
            });
        }

        // Covers sigma == 0 exactly (zero observation, zero coefficients, or
        // zero residual), since residual_tol * ||v|| is >= 0.
        if sigma <= self.config.residual_tol * observed_norm {
            return Ok(UpdateReport {
                weights: sol.weights,
                predicted_norm,
                residual_norm,
                observed_norm,
                sigma,
                eta,
                skipped: true,
                skip_reason: SkipReason::NegligibleResidual,
            });
        }

        let weight_norm = sol.weights.norm();
        // While U stays orthonormal, ||U w|| and ||w|| agree; a growing gap
        // would mean the basis has silently lost orthonormality.
        debug_assert!(
            (predicted_norm - weight_norm).abs() <= 1e-6 * weight_norm,
            "prediction norm {predicted_norm} drifted from weight norm {weight_norm}"
        );

        let angle = eta * sigma;
        // Geodesic step: U += ((cos(angle) - 1) p/||p|| + sin(angle) r/||r||) (w/||w||)^T
        // with r zero-padded off the support. The cosine part shrinks the
        // in-plane direction, the sine part rotates the residual in.
        let mut direction = prediction;
        direction *= (angle.cos() - 1.0) / predicted_norm;
        let sine_scale = angle.sin() / residual_norm;
        for (k, &i) in obs.support().iter().enumerate() {
            direction[i] += sine_scale * sol.residual[k];
        }
        let weights_hat = &sol.weights / weight_norm;
        self.basis.ger(1.0, &direction, &weights_hat, 1.0);

        Ok(UpdateReport {
            weights: sol.weights,
            predicted_norm,
            residual_norm,
            observed_norm,
            sigma,
            eta,
            skipped: false,
            skip_reason: SkipReason::None,
        })
    }

    /// Fit cost of the current basis on one observation (see [`masked_cost`]).
    pub fn cost(&self, obs: &MaskedVector) -> Result<f64> {
        masked_cost(&self.basis, obs)
    }

    /// Gradient of the fit cost with respect to the basis entries, treating
    /// the coefficients as refit at the optimum: `-2 r w^T` with `r`
    /// zero-padded off the support. Errors when the restricted basis is
    /// rank-deficient, since the optimum is then not unique.
    pub fn euclidean_gradient(&self, obs: &MaskedVector) -> Result<DMatrix<f64>> {
        if obs.ambient_dim() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                context: "gradient observation",
                expected: self.ambient_dim(),
                actual: obs.ambient_dim(),
            });
        }
        let sol = masked_least_squares(&self.basis, obs)?;
        if !sol.rank_ok {
            return Err(Error::RankDeficient {
                context: "euclidean_gradient",
                ratio: 0.0,
            });
        }
        let mut grad = DMatrix::zeros(self.ambient_dim(), self.rank());
        for (k, &i) in obs.support().iter().enumerate() {
            let scale = -2.0 * sol.residual[k];
            for j in 0..self.rank() {
                grad[(i, j)] = scale * sol.weights[j];
            }
        }
        Ok(grad)
    }

    /// Reference form of one update as a full rotation: embeds the basis and
    /// the unit residual in an `n x (d+1)` frame, applies the plane rotation
    /// by `eta * sigma` mixing the coefficient direction with the residual
    /// slot, and drops the extra column. Costs `O(n d^2)`; used to
    /// cross-check [`GrouseTracker::step`], which must agree to near machine
    /// precision. Does not mutate the tracker.
    ///
    /// Errors on degenerate steps (zero coefficients or zero residual) where
    /// the rotation plane is undefined.
    pub fn rotation_form_step(&self, obs: &MaskedVector, eta: f64) -> Result<DMatrix<f64>> {
        if obs.ambient_dim() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                context: "rotation-form observation",
                expected: self.ambient_dim(),
                actual: obs.ambient_dim(),
            });
        }
        if !eta.is_finite() || eta < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "step size must be finite and non-negative, got {eta}"
            )));
        }
        let sol = masked_least_squares(&self.basis, obs)?;
        let weight_norm = sol.weights.norm();
        let residual_norm = sol.residual.norm();
        if weight_norm == 0.0 || residual_norm == 0.0 {
            return Err(Error::InvalidParameter(
                "rotation plane undefined: zero coefficients or zero residual".to_string(),
            ));
        }
        let n = self.ambient_dim();
        let d = self.rank();
        let prediction = &self.basis * &sol.weights;
        let sigma = residual_norm * prediction.norm();
        let angle = eta * sigma;
        let weights_hat = &sol.weights / weight_norm;

        // Frame [U, r_hat] with the residual zero-padded to full dimension.
        let mut frame = DMatrix::zeros(n, d + 1);
        frame.view_mut((0, 0), (n, d)).copy_from(&self.basis);
        for (k, &i) in obs.support().iter().enumerate() {
            frame[(i, d)] = sol.residual[k] / residual_norm;
        }

        // Rotation acting on the frame coordinates: identity off the plane
        // spanned by (w_hat, residual slot).
        let mut rotation = DMatrix::identity(d + 1, d + 1);
        let cos_m1 = angle.cos() - 1.0;
        let sin = angle.sin();
        for i in 0..d {
            for j in 0..d {
                rotation[(i, j)] += cos_m1 * weights_hat[i] * weights_hat[j];
            }
            rotation[(i, d)] = -sin * weights_hat[i];
            rotation[(d, i)] = sin * weights_hat[i];
        }
        rotation[(d, d)] = angle.cos();

        let rotated = frame * rotation;
        Ok(rotated.view((0, 0), (n, d)).into_owned())
    }
}
