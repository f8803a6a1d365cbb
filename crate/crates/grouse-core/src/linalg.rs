//! Dense linear-algebra kernels shared by the tracker, the stream generators,
//! and the completion driver.
//!
//! All matrices are `nalgebra::DMatrix<f64>` in column-major storage; a basis
//! is an `n x d` matrix whose columns are meant to be orthonormal. Partial
//! observations are carried by [`MaskedVector`], which pairs a sorted
//! [`IndexSet`] of observed coordinates with the observed values.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative singular-value cutoff: singular values at or below
/// `RANK_TOLERANCE * sigma_max` are treated as zero when deciding rank.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Largest Frobenius defect `||U^T U - I||_F` accepted before a matrix is
/// rejected as not orthonormal.
pub const ORTHONORMALITY_TOLERANCE: f64 = 1e-8;

/// Relative skewness cutoff: `B` is accepted as skew-symmetric when
/// `||B + B^T||_F <= SKEW_TOLERANCE * ||B||_F`.
pub const SKEW_TOLERANCE: f64 = 1e-12;

/// A sorted, duplicate-free set of coordinate indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSet {
    indices: Vec<usize>,
}

impl IndexSet {
    /// Builds an index set from arbitrary order, sorting and rejecting
    /// duplicates.
    pub fn new(mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        if let Some(w) = indices.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidIndexSet(format!(
                "duplicate index {}",
                w[0]
            )));
        }
        Ok(Self { indices })
    }

    /// The full set `{0, 1, ..., n-1}`.
    pub fn full(n: usize) -> Self {
        Self {
            indices: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, usize> {
        self.indices.iter()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.indices
    }

    /// Largest index, if any.
    pub fn max(&self) -> Option<usize> {
        self.indices.last().copied()
    }
}

/// A partially observed vector in an `ambient_dim`-dimensional space:
/// `values[i]` is the entry at coordinate `support[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedVector {
    ambient_dim: usize,
    support: IndexSet,
    values: DVector<f64>,
}

impl MaskedVector {
    /// Pairs a support with its observed values. The support may be empty;
    /// every index must lie below `ambient_dim` and every value must be
    /// finite.
    pub fn new(ambient_dim: usize, support: IndexSet, values: DVector<f64>) -> Result<Self> {
        if values.len() != support.len() {
            return Err(Error::DimensionMismatch {
                context: "masked vector values",
                expected: support.len(),
                actual: values.len(),
            });
        }
        if let Some(max) = support.max() {
            if max >= ambient_dim {
                return Err(Error::InvalidIndexSet(format!(
                    "index {max} out of range for dimension {ambient_dim}"
                )));
            }
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "masked vector values",
                index: i,
                value: values[i],
            });
        }
        Ok(Self {
            ambient_dim,
            support,
            values,
        })
    }

    /// Fully observed vector: support `{0, ..., len-1}`.
    pub fn full(values: DVector<f64>) -> Result<Self> {
        let n = values.len();
        Self::new(n, IndexSet::full(n), values)
    }

    /// Restriction of a dense vector to the given support.
    pub fn from_dense(dense: &DVector<f64>, support: IndexSet) -> Result<Self> {
        let values = DVector::from_iterator(support.len(), support.iter().map(|&i| dense[i]));
        Self::new(dense.len(), support, values)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn support(&self) -> &IndexSet {
        &self.support
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    /// Number of observed coordinates.
    pub fn sample_count(&self) -> usize {
        self.support.len()
    }

    /// Dense vector with unobserved coordinates set to zero.
    pub fn to_dense(&self) -> DVector<f64> {
        let mut out = DVector::zeros(self.ambient_dim);
        for (k, &i) in self.support.iter().enumerate() {
            out[i] = self.values[k];
        }
        out
    }
}

/// Result of a masked least-squares solve.
#[derive(Debug, Clone)]
pub struct MaskedLsq {
    /// Minimizer of `||U_omega w - v_omega||`; the minimum-norm minimizer
    /// when `U_omega` is rank-deficient.
    pub weights: DVector<f64>,
    /// Residual `v_omega - U_omega w` aligned with the support (entry `k`
    /// belongs to coordinate `support[k]`).
    pub residual: DVector<f64>,
    /// True when the restricted basis has full column rank under
    /// [`RANK_TOLERANCE`].
    pub rank_ok: bool,
}

/// Solves `min_w ||U_omega w - v_omega||` via an SVD of the restricted basis.
///
/// The support must be non-empty. Rank deficiency is not an error: the
/// minimum-norm solution is returned with `rank_ok = false`, leaving the
/// caller to decide policy.
pub fn masked_least_squares(basis: &DMatrix<f64>, obs: &MaskedVector) -> Result<MaskedLsq> {
    if obs.ambient_dim() != basis.nrows() {
        return Err(Error::DimensionMismatch {
            context: "masked least squares observation",
            expected: basis.nrows(),
            actual: obs.ambient_dim(),
        });
    }
    let m = obs.sample_count();
    if m == 0 {
        return Err(Error::InvalidIndexSet(
            "empty support in masked least squares".to_string(),
        ));
    }
    let d = basis.ncols();
    if d == 0 {
        return Ok(MaskedLsq {
            weights: DVector::zeros(0),
            residual: obs.values().clone(),
            rank_ok: true,
        });
    }
    let mut restricted = DMatrix::zeros(m, d);
    for (k, &i) in obs.support().iter().enumerate() {
        restricted.row_mut(k).copy_from(&basis.row(i));
    }
    let svd = restricted.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let cutoff = RANK_TOLERANCE * sigma_max;
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");

    let mut rank = 0usize;
    for &s in svd.singular_values.iter() {
        if s > cutoff && s > 0.0 {
            rank += 1;
        }
    }
    let apply_pseudo_inverse = |rhs: &DVector<f64>| -> DVector<f64> {
        let mut out = DVector::zeros(d);
        for (k, &s) in svd.singular_values.iter().enumerate() {
            if s > cutoff && s > 0.0 {
                let coef = u.column(k).dot(rhs) / s;
                out.axpy(coef, &v_t.row(k).transpose(), 1.0);
            }
        }
        out
    };
    let mut weights = apply_pseudo_inverse(obs.values());
    // One pass of iterative refinement: reapplying the truncated
    // pseudo-inverse to the current residual drives the in-span component
    // of the residual down to rounding level even when the factorization
    // itself converged a few digits short. The correction lies in the kept
    // right singular subspace, so minimum-norm solutions stay minimum-norm.
    let residual = obs.values() - &restricted * &weights;
    weights += apply_pseudo_inverse(&residual);
    let residual = obs.values() - &restricted * &weights;
    Ok(MaskedLsq {
        weights,
        residual,
        rank_ok: rank == d,
    })
}

/// Orthonormalizes the columns of `a` by Householder QR, preserving the
/// column span. Errors when `a` is column rank-deficient, judged by the
/// ratio of extreme `R` diagonal magnitudes against [`RANK_TOLERANCE`].
pub fn orthonormalize(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, d) = a.shape();
    if d == 0 || n < d {
        return Err(Error::InvalidParameter(format!(
            "cannot orthonormalize a {n}x{d} matrix: need 1 <= columns <= rows"
        )));
    }
    let qr = a.clone().qr();
    let r = qr.r();
    let mut max_diag = 0.0f64;
    let mut min_diag = f64::INFINITY;
    for k in 0..d {
        let v = r[(k, k)].abs();
        max_diag = max_diag.max(v);
        min_diag = min_diag.min(v);
    }
    if min_diag <= RANK_TOLERANCE * max_diag {
        return Err(Error::RankDeficient {
            context: "orthonormalize",
            ratio: if max_diag > 0.0 { min_diag / max_diag } else { 0.0 },
        });
    }
    Ok(qr.q())
}

/// Frobenius defect `||U^T U - I||_F` of a candidate orthonormal basis.
pub fn orthonormality_defect(basis: &DMatrix<f64>) -> f64 {
    let d = basis.ncols();
    let gram = basis.transpose() * basis;
    (gram - DMatrix::identity(d, d)).norm()
}

fn check_orthonormal(basis: &DMatrix<f64>, context: &'static str) -> Result<()> {
    let defect = orthonormality_defect(basis);
    if defect > ORTHONORMALITY_TOLERANCE {
        return Err(Error::NotOrthonormal {
            context,
            defect,
            tolerance: ORTHONORMALITY_TOLERANCE,
        });
    }
    Ok(())
}

/// Matrix exponential `exp(scale * B)` of a skew-symmetric `B`, computed by
/// scaling-and-squaring with a truncated power series.
///
/// `B` must be square and skew-symmetric within [`SKEW_TOLERANCE`]
/// (relative, so the zero matrix passes). The result of exponentiating a
/// skew-symmetric matrix is orthogonal.
pub fn expm_skew(b: &DMatrix<f64>, scale: f64) -> Result<DMatrix<f64>> {
    let (n, m) = b.shape();
    if n != m {
        return Err(Error::DimensionMismatch {
            context: "expm_skew input",
            expected: n,
            actual: m,
        });
    }
    if !scale.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "expm_skew scale must be finite, got {scale}"
        )));
    }
    let norm_b = b.norm();
    let skew_defect = (b + b.transpose()).norm();
    if skew_defect > SKEW_TOLERANCE * norm_b {
        return Err(Error::NotSkewSymmetric {
            defect: skew_defect,
            tolerance: SKEW_TOLERANCE * norm_b,
        });
    }

    let x = b * scale;
    // Halve until the Frobenius norm is at most 1/2, where the power series
    // converges fast; undo by repeated squaring.
    let norm_x = x.norm();
    let squarings = if norm_x > 0.5 {
        (norm_x / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let xs = x / f64::powi(2.0, squarings as i32);

    let identity = DMatrix::identity(n, n);
    let mut term = identity.clone();
    let mut sum = identity;
    for j in 1..=64u32 {
        term = (&term * &xs) / f64::from(j);
        sum += &term;
        if term.norm() <= f64::EPSILON * sum.norm() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    Ok(sum)
}

/// Span distance between two orthonormal bases of equal shape:
/// `||W - U (U^T W)||_F / sqrt(d)`, which is 0 for equal spans and 1 for
/// orthogonal spans. Both inputs must be orthonormal within
/// [`ORTHONORMALITY_TOLERANCE`].
pub fn subspace_error(estimate: &DMatrix<f64>, reference: &DMatrix<f64>) -> Result<f64> {
    if estimate.shape() != reference.shape() {
        return Err(Error::DimensionMismatch {
            context: "subspace_error shapes",
            expected: estimate.nrows() * estimate.ncols(),
            actual: reference.nrows() * reference.ncols(),
        });
    }
    check_orthonormal(estimate, "subspace_error estimate")?;
    check_orthonormal(reference, "subspace_error reference")?;
    let d = estimate.ncols();
    let coords = estimate.transpose() * reference;
    let off_span = reference - estimate * coords;
    Ok(off_span.norm() / (d as f64).sqrt())
}
