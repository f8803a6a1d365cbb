//! Seeded synthetic streams: planted subspaces, vectors drawn from them, and
//! observation masks.
//!
//! Every random quantity comes from a ChaCha8 stream keyed by `(seed, step,
//! purpose)`, so a rebuilt generator replays the identical stream and
//! per-step draws are independent of how earlier steps were consumed. The
//! RNG family is fixed (not `StdRng`) so streams are stable across platforms
//! and releases.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{expm_skew, orthonormalize, IndexSet};

/// How often a rotating stream re-orthonormalizes its basis. Each rotation
/// factor is orthogonal only to rounding error; refreshing by QR (which
/// preserves the span exactly) keeps the accumulated defect well below 1e-9
/// over arbitrarily long streams.
pub const ROTATION_REFRESH_INTERVAL: u64 = 512;

const TAG_BASIS: u64 = 1;
const TAG_GENERATOR: u64 = 2;
const TAG_COEFF: u64 = 3;
const TAG_NOISE: u64 = 4;
const TAG_MASK: u64 = 5;

/// ChaCha8 stream keyed by `(seed, step, purpose)`.
fn substream(seed: u64, step: u64, tag: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&step.to_le_bytes());
    key[16..24].copy_from_slice(&tag.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Random `n x d` orthonormal basis: a seeded Gaussian matrix,
/// orthonormalized. Identical `(n, d, seed)` give identical bases.
pub fn planted_subspace(ambient_dim: usize, rank: usize, seed: u64) -> Result<DMatrix<f64>> {
    if rank == 0 || rank > ambient_dim {
        return Err(Error::InvalidParameter(format!(
            "planted subspace needs 1 <= rank <= dimension, got rank {rank} in dimension {ambient_dim}"
        )));
    }
    let mut rng = substream(seed, 0, TAG_BASIS);
    orthonormalize(&gaussian_matrix(&mut rng, ambient_dim, rank))
}

/// Spectral-norm estimate of `b` by power iteration on `b^T b`, applied as
/// two matrix-vector products per iteration. Deterministic: the start vector
/// comes from the caller's stream and the iteration count is fixed.
fn spectral_norm_estimate(b: &DMatrix<f64>, rng: &mut ChaCha8Rng) -> f64 {
    let n = b.nrows();
    let mut x: DVector<f64> = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
    x /= x.norm();
    let mut estimate = 0.0;
    for _ in 0..100 {
        let y = b * &x;
        let z = b.transpose() * y;
        let norm = z.norm();
        if norm == 0.0 {
            return 0.0;
        }
        estimate = norm.sqrt();
        x = z / norm;
    }
    estimate
}

/// How the generating subspace evolves over the stream.
#[derive(Debug, Clone, PartialEq)]
pub enum SubspaceMotion {
    /// One fixed subspace.
    Static,
    /// A fresh independent subspace takes effect at each listed step: the
    /// vector at step `s` is the first one drawn from the next basis.
    Switching { switch_steps: Vec<u64> },
    /// The basis spins as `U_t = E U_{t-1}` with `E = exp(delta * B)` for a
    /// fixed random skew-symmetric `B` of unit spectral norm.
    Rotating { delta: f64 },
}

/// Seeded source of stream vectors `v_t = U_t a_t + noise_std * g_t` with
/// Gaussian coefficients and noise.
#[derive(Debug, Clone)]
pub struct GenerativeModel {
    ambient_dim: usize,
    rank: usize,
    noise_std: f64,
    seed: u64,
    motion: SubspaceMotion,
    /// Active basis per segment; a single entry unless switching.
    segments: Vec<DMatrix<f64>>,
    /// Per-step rotation factor (rotating only).
    rotation: Option<DMatrix<f64>>,
    /// Skew generator behind `rotation`, kept for oracle checks.
    generator: Option<DMatrix<f64>>,
    current_basis: DMatrix<f64>,
    current_step: u64,
    segment_index: usize,
}

impl GenerativeModel {
    pub fn new(
        motion: SubspaceMotion,
        ambient_dim: usize,
        rank: usize,
        noise_std: f64,
        seed: u64,
    ) -> Result<Self> {
        if rank == 0 || rank > ambient_dim {
            return Err(Error::InvalidParameter(format!(
                "stream rank must satisfy 1 <= rank <= dimension, got rank {rank} in dimension {ambient_dim}"
            )));
        }
        if !noise_std.is_finite() || noise_std < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "noise_std must be finite and non-negative, got {noise_std}"
            )));
        }
        let mut segments = Vec::new();
        let mut rotation = None;
        let mut generator = None;
        match &motion {
            SubspaceMotion::Static => {
                segments.push(planted_subspace(ambient_dim, rank, seed)?);
            }
            SubspaceMotion::Switching { switch_steps } => {
                if switch_steps.is_empty() {
                    return Err(Error::InvalidParameter(
                        "switching stream needs at least one switch step".to_string(),
                    ));
                }
                if switch_steps[0] < 2 {
                    return Err(Error::InvalidParameter(
                        "first switch step must be at least 2".to_string(),
                    ));
                }
                if switch_steps.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidParameter(
                        "switch steps must be strictly increasing".to_string(),
                    ));
                }
                for k in 0..=switch_steps.len() as u64 {
                    let mut rng = substream(seed, k, TAG_BASIS);
                    segments.push(orthonormalize(&gaussian_matrix(
                        &mut rng,
                        ambient_dim,
                        rank,
                    ))?);
                }
            }
            SubspaceMotion::Rotating { delta } => {
                if !delta.is_finite() || *delta < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "rotation rate must be finite and non-negative, got {delta}"
                    )));
                }
                segments.push(planted_subspace(ambient_dim, rank, seed)?);
                let mut rng = substream(seed, 0, TAG_GENERATOR);
                let g = gaussian_matrix(&mut rng, ambient_dim, ambient_dim);
                let mut skew = (&g - g.transpose()) * 0.5;
                let norm = spectral_norm_estimate(&skew, &mut rng);
                if norm == 0.0 {
                    return Err(Error::InvalidParameter(
                        "degenerate rotation generator".to_string(),
                    ));
                }
                skew /= norm;
                rotation = Some(expm_skew(&skew, *delta)?);
                generator = Some(skew);
            }
        }
        let current_basis = segments[0].clone();
        Ok(Self {
            ambient_dim,
            rank,
            noise_std,
            seed,
            motion,
            segments,
            rotation,
            generator,
            current_basis,
            current_step: 0,
            segment_index: 0,
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    pub fn motion(&self) -> &SubspaceMotion {
        &self.motion
    }

    /// Steps generated so far; the next vector is step `current_step + 1`.
    pub fn current_step(&self) -> u64 {
        self.current_step
    }

    /// Basis that generated the most recent vector (the initial basis before
    /// any vector is drawn).
    pub fn true_basis(&self) -> &DMatrix<f64> {
        &self.current_basis
    }

    /// Basis at stream start.
    pub fn initial_basis(&self) -> &DMatrix<f64> {
        &self.segments[0]
    }

    /// Unit-spectral-norm skew generator of a rotating stream.
    pub fn rotation_generator(&self) -> Option<&DMatrix<f64>> {
        self.generator.as_ref()
    }

    /// Draws the next stream vector, advancing the subspace first when the
    /// motion calls for it.
    pub fn next_vector(&mut self) -> DVector<f64> {
        self.current_step += 1;
        let t = self.current_step;
        match &self.motion {
            SubspaceMotion::Static => {}
            SubspaceMotion::Switching { switch_steps } => {
                while self.segment_index < switch_steps.len()
                    && t >= switch_steps[self.segment_index]
                {
                    self.segment_index += 1;
                    self.current_basis = self.segments[self.segment_index].clone();
                }
            }
            SubspaceMotion::Rotating { .. } => {
                let rotation = self.rotation.as_ref().expect("rotating model has a factor");
                self.current_basis = rotation * &self.current_basis;
                if t.is_multiple_of(ROTATION_REFRESH_INTERVAL) {
                    self.current_basis = orthonormalize(&self.current_basis)
                        .expect("rotated basis stays full rank");
                }
            }
        }
        let mut coeff_rng = substream(self.seed, t, TAG_COEFF);
        let coeffs: DVector<f64> =
            DVector::from_fn(self.rank, |_, _| StandardNormal.sample(&mut coeff_rng));
        let mut v = &self.current_basis * coeffs;
        if self.noise_std > 0.0 {
            let mut noise_rng = substream(self.seed, t, TAG_NOISE);
            for i in 0..self.ambient_dim {
                let g: f64 = StandardNormal.sample(&mut noise_rng);
                v[i] += self.noise_std * g;
            }
        }
        v
    }
}

/// How observation masks are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingKind {
    /// Exactly `round(density * n)` coordinates per step, uniform without
    /// replacement.
    FixedSize,
    /// Each coordinate included independently with probability `density`.
    Bernoulli,
}

/// Seeded mask source. Masks depend only on `(seed, step)`, never on how
/// many masks were drawn before.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingModel {
    kind: SamplingKind,
    density: f64,
    seed: u64,
}

impl SamplingModel {
    pub fn new(kind: SamplingKind, density: f64, seed: u64) -> Result<Self> {
        if !density.is_finite() || density <= 0.0 || density > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "sampling density must lie in (0, 1], got {density}"
            )));
        }
        Ok(Self {
            kind,
            density,
            seed,
        })
    }

    pub fn kind(&self) -> SamplingKind {
        self.kind
    }

    pub fn density(&self) -> f64 {
        self.density
    }

    /// Mask for step `t` over `{0, ..., n-1}`.
    ///
    /// Fixed-size draws error when the target count rounds to zero;
    /// Bernoulli draws may legitimately come out empty.
    pub fn draw_mask(&self, n: usize, t: u64) -> Result<IndexSet> {
        let mut rng = substream(self.seed, t, TAG_MASK);
        match self.kind {
            SamplingKind::FixedSize => {
                let k = (self.density * n as f64).round() as usize;
                if k == 0 {
                    return Err(Error::InvalidParameter(format!(
                        "fixed-size mask of {n} coordinates at density {} rounds to zero samples",
                        self.density
                    )));
                }
                let k = k.min(n);
                IndexSet::new(sample_indices(&mut rng, n, k).into_vec())
            }
            SamplingKind::Bernoulli => {
                let picked: Vec<usize> = (0..n)
                    .filter(|_| rng.random::<f64>() < self.density)
                    .collect();
                IndexSet::new(picked)
            }
        }
    }
}
