//! Cross-checks of every derived quantity against an independently coded
//! reference route: normal equations for the least-squares fit, central
//! finite differences for the gradient, a dense projector for the cost, a
//! full rotation matrix for the update, and a fixed-parameter power series
//! for the matrix exponential.

use grouse_core::{
    expm_skew, masked_cost, masked_least_squares, orthonormalize, subspace_error, GrouseTracker,
    IndexSet, MaskedVector, StepSchedule, TrackerConfig,
};
use nalgebra::{Cholesky, DMatrix, DVector};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn gaussian_vector(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| StandardNormal.sample(rng))
}

/// Random orthonormal basis, observation, and a mask with at least
/// `extra` more samples than the rank.
fn random_instance(
    rng: &mut ChaCha8Rng,
    extra: usize,
) -> (DMatrix<f64>, MaskedVector) {
    let d = rng.random_range(1..=5usize);
    let n = rng.random_range((d + extra + 1)..=(d + extra + 24));
    let basis = orthonormalize(&gaussian_matrix(rng, n, d)).unwrap();
    let m = rng.random_range((d + extra)..=n);
    let mut all: Vec<usize> = (0..n).collect();
    let picked: Vec<usize> = all
        .partial_shuffle(rng, m)
        .0
        .to_vec();
    let support = IndexSet::new(picked).unwrap();
    let dense = gaussian_vector(rng, n);
    let obs = MaskedVector::from_dense(&dense, support).unwrap();
    (basis, obs)
}

/// Reference solve via the normal equations `(U_o^T U_o) w = U_o^T v`,
/// factored by Cholesky: a different route from the SVD used in the library.
fn normal_equations_fit(basis: &DMatrix<f64>, obs: &MaskedVector) -> DVector<f64> {
    let d = basis.ncols();
    let m = obs.sample_count();
    let mut restricted = DMatrix::zeros(m, d);
    for (k, &i) in obs.support().iter().enumerate() {
        restricted.row_mut(k).copy_from(&basis.row(i));
    }
    let gram = restricted.transpose() * &restricted;
    let rhs = restricted.transpose() * obs.values();
    Cholesky::new(gram)
        .expect("test instances are well conditioned")
        .solve(&rhs)
}

#[test]
fn least_squares_agrees_with_normal_equations_on_many_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..120 {
        let (basis, obs) = random_instance(&mut rng, 3);
        let sol = masked_least_squares(&basis, &obs).unwrap();
        assert!(sol.rank_ok, "trial {trial} drew a degenerate instance");
        let reference = normal_equations_fit(&basis, &obs);
        let diff = (&sol.weights - &reference).norm();
        assert!(
            diff <= 1e-8 * (1.0 + reference.norm()),
            "trial {trial}: solutions diverge by {diff}"
        );
        // The defining property: the residual is orthogonal to the fitted
        // columns.
        let mut restricted = DMatrix::zeros(obs.sample_count(), basis.ncols());
        for (k, &i) in obs.support().iter().enumerate() {
            restricted.row_mut(k).copy_from(&basis.row(i));
        }
        let cross = (restricted.transpose() * &sol.residual).norm();
        assert!(
            cross <= 1e-10 * (1.0 + obs.values().norm()),
            "trial {trial}: residual not orthogonal to the span ({cross})"
        );
    }
}

/// The oracle's own cost route, sharing nothing with the library: fit by
/// normal equations and Cholesky, then take the squared residual.
fn reference_cost(basis: &DMatrix<f64>, obs: &MaskedVector) -> f64 {
    let d = basis.ncols();
    let m = obs.sample_count();
    let mut restricted = DMatrix::zeros(m, d);
    for (k, &i) in obs.support().iter().enumerate() {
        restricted.row_mut(k).copy_from(&basis.row(i));
    }
    let gram = restricted.transpose() * &restricted;
    let rhs = restricted.transpose() * obs.values();
    let w = Cholesky::new(gram)
        .expect("well-conditioned by construction")
        .solve(&rhs);
    (obs.values() - restricted * w).norm_squared()
}

#[test]
fn gradient_matches_central_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(555);
    let h = 1e-6;
    let mut checked = 0;
    for trial in 0..160 {
        let (basis, obs) = random_instance(&mut rng, 2);
        // Skip ill-conditioned restrictions: their cost has third
        // derivatives large enough to swamp the finite-difference step.
        let mut restricted = DMatrix::zeros(obs.sample_count(), basis.ncols());
        for (k, &i) in obs.support().iter().enumerate() {
            restricted.row_mut(k).copy_from(&basis.row(i));
        }
        let sigma_min = restricted.svd(false, false).singular_values.min();
        if sigma_min < 0.3 {
            continue;
        }
        checked += 1;
        let tracker = GrouseTracker::from_basis(basis.clone(), TrackerConfig::default()).unwrap();
        let grad = tracker.euclidean_gradient(&obs).unwrap();
        // The analytic center-point cost agrees with the reference route.
        let center = masked_cost(&basis, &obs).unwrap();
        let center_ref = reference_cost(&basis, &obs);
        assert!(
            (center - center_ref).abs() <= 1e-9 * (1.0 + center_ref),
            "trial {trial}: cost routes disagree ({center} vs {center_ref})"
        );
        let mut fd = DMatrix::zeros(basis.nrows(), basis.ncols());
        for i in 0..basis.nrows() {
            for j in 0..basis.ncols() {
                // The cost is defined for arbitrary (non-orthonormal)
                // matrices, so entrywise perturbation is legitimate.
                let mut plus = basis.clone();
                plus[(i, j)] += h;
                let mut minus = basis.clone();
                minus[(i, j)] -= h;
                fd[(i, j)] =
                    (reference_cost(&plus, &obs) - reference_cost(&minus, &obs)) / (2.0 * h);
            }
        }
        let diff = (&grad - &fd).norm();
        let scale = grad.norm().max(1.0);
        assert!(
            diff <= 1e-5 * scale,
            "trial {trial}: gradient and finite differences diverge by {diff} (scale {scale})"
        );
    }
    assert!(checked >= 100, "too few well-conditioned trials ({checked})");
}

#[test]
fn cost_matches_dense_projector_on_full_observations() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..50 {
        let d = rng.random_range(1..=6usize);
        let n = rng.random_range((d + 1)..=40);
        let basis = orthonormalize(&gaussian_matrix(&mut rng, n, d)).unwrap();
        let v = gaussian_vector(&mut rng, n);
        let cost = masked_cost(&basis, &MaskedVector::full(v.clone()).unwrap()).unwrap();
        // Independent route: project out the span with an explicit projector.
        let projector = DMatrix::identity(n, n) - &basis * basis.transpose();
        let reference = (projector * &v).norm_squared();
        assert!(
            (cost - reference).abs() <= 1e-10 * (1.0 + reference),
            "cost {cost} vs projector {reference}"
        );
    }
}

#[test]
fn update_agrees_with_the_full_rotation_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(90210);
    for trial in 0..120 {
        let (basis, obs) = random_instance(&mut rng, 2);
        let eta = rng.random_range(1e-3..0.5);
        let config = TrackerConfig {
            schedule: StepSchedule::Constant { c: eta },
            ..TrackerConfig::default()
        };
        let tracker = GrouseTracker::from_basis(basis, config).unwrap();
        let rotated = tracker.rotation_form_step(&obs, eta).unwrap();
        let mut stepped = tracker.clone();
        let report = stepped.step(&obs).unwrap();
        assert!(!report.skipped, "trial {trial} drew a degenerate step");
        let diff = (stepped.basis() - &rotated).norm();
        assert!(
            diff <= 1e-10,
            "trial {trial}: rank-one update and rotation form diverge by {diff}"
        );
        // The rotation form is itself orthonormal. Its frame normalizes the
        // residual, which amplifies rounding by 1/||r|| on near-degenerate
        // draws, so the bound is looser than for the rank-one route.
        let defect = (rotated.transpose() * &rotated
            - DMatrix::identity(tracker.rank(), tracker.rank()))
        .norm();
        assert!(defect < 1e-8, "trial {trial}: rotated basis defect {defect}");
    }
}

#[test]
fn small_steps_reduce_the_cost() {
    let mut rng = ChaCha8Rng::seed_from_u64(777);
    let mut checked = 0;
    for trial in 0..100 {
        let (basis, obs) = random_instance(&mut rng, 2);
        let before = masked_cost(&basis, &obs).unwrap();
        if before < 1e-12 {
            continue; // already at a minimum; no descent to observe
        }
        // Halve the step until the exact cost decreases; a gradient-related
        // direction must succeed after finitely many halvings.
        let mut eta = 0.1;
        let mut descended = false;
        for _ in 0..20 {
            let config = TrackerConfig {
                schedule: StepSchedule::Constant { c: eta },
                ..TrackerConfig::default()
            };
            let mut tracker = GrouseTracker::from_basis(basis.clone(), config).unwrap();
            let report = tracker.step(&obs).unwrap();
            if !report.skipped {
                let after = masked_cost(tracker.basis(), &obs).unwrap();
                if after < before {
                    descended = true;
                    break;
                }
            }
            eta *= 0.5;
        }
        assert!(descended, "trial {trial}: no step size descended from {before}");
        checked += 1;
    }
    assert!(checked >= 90, "too few informative trials ({checked})");
}

/// Power series with fixed, deliberately different parameters from the
/// library (16 halvings always, 12 terms): an independent route to exp(sB).
/// Deeper scaling would amplify squaring round-off past the tolerance.
fn expm_reference(b: &DMatrix<f64>, scale: f64) -> DMatrix<f64> {
    let n = b.nrows();
    let xs = b * (scale / f64::powi(2.0, 16));
    let mut term = DMatrix::identity(n, n);
    let mut sum = DMatrix::identity(n, n);
    for j in 1..=12u32 {
        term = (&term * &xs) / f64::from(j);
        sum += &term;
    }
    for _ in 0..16 {
        sum = &sum * &sum;
    }
    sum
}

#[test]
fn expm_skew_agrees_with_fixed_parameter_series() {
    let mut rng = ChaCha8Rng::seed_from_u64(4096);
    for _ in 0..30 {
        let n = rng.random_range(2..=12usize);
        let g = gaussian_matrix(&mut rng, n, n);
        let b = (&g - g.transpose()) * 0.5;
        let scale = rng.random_range(-5.0..5.0);
        let fast = expm_skew(&b, scale).unwrap();
        let reference = expm_reference(&b, scale);
        let diff = (&fast - &reference).norm();
        assert!(diff <= 1e-10 * reference.norm().max(1.0), "diverged by {diff}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Residual orthogonality holds for arbitrary observed values, not just
    /// Gaussian draws.
    #[test]
    fn lsq_residual_is_orthogonal_to_restricted_basis(
        seed in 0u64..1_000_000,
        values in prop::collection::vec(-100.0f64..100.0, 6),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = orthonormalize(&gaussian_matrix(&mut rng, 12, 2)).unwrap();
        let support = IndexSet::new(vec![0, 2, 4, 6, 8, 10]).unwrap();
        let obs = MaskedVector::new(12, support, DVector::from_vec(values)).unwrap();
        let sol = masked_least_squares(&basis, &obs).unwrap();
        let mut restricted = DMatrix::zeros(6, 2);
        for (k, &i) in obs.support().iter().enumerate() {
            restricted.row_mut(k).copy_from(&basis.row(i));
        }
        let cross = (restricted.transpose() * &sol.residual).norm();
        prop_assert!(cross <= 1e-9 * (1.0 + obs.values().norm()));
    }

    /// The span distance is symmetric in its arguments.
    #[test]
    fn subspace_error_is_symmetric(seed_a in 0u64..100_000, seed_b in 0u64..100_000) {
        let mut rng_a = ChaCha8Rng::seed_from_u64(seed_a);
        let mut rng_b = ChaCha8Rng::seed_from_u64(seed_b.wrapping_add(1 << 32));
        let u = orthonormalize(&gaussian_matrix(&mut rng_a, 15, 3)).unwrap();
        let w = orthonormalize(&gaussian_matrix(&mut rng_b, 15, 3)).unwrap();
        let uw = subspace_error(&u, &w).unwrap();
        let wu = subspace_error(&w, &u).unwrap();
        prop_assert!((uw - wu).abs() <= 1e-12, "{uw} vs {wu}");
        prop_assert!((0.0..=1.0 + 1e-12).contains(&uw));
    }

    /// One-parameter group property of the exponential.
    #[test]
    fn expm_skew_has_the_group_property(a in -3.0f64..3.0, b in -3.0f64..3.0, seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = gaussian_matrix(&mut rng, 5, 5);
        let skew = (&g - g.transpose()) * 0.5;
        let combined = expm_skew(&skew, a + b).unwrap();
        let split = expm_skew(&skew, a).unwrap() * expm_skew(&skew, b).unwrap();
        prop_assert!((combined - split).norm() <= 1e-11);
    }

    /// Tracker steps preserve orthonormality for arbitrary step sizes in a
    /// sane range and arbitrary masks above the sample threshold.
    #[test]
    fn any_single_step_preserves_orthonormality(
        seed in 0u64..1_000_000,
        eta in 1e-4f64..2.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (basis, obs) = {
            let d = 3usize;
            let n = 20usize;
            let basis = orthonormalize(&gaussian_matrix(&mut rng, n, d)).unwrap();
            let mut all: Vec<usize> = (0..n).collect();
            let m = rng.random_range((d + 1)..=n);
            let picked = all.partial_shuffle(&mut rng, m).0.to_vec();
            let dense = gaussian_vector(&mut rng, n);
            (
                basis,
                MaskedVector::from_dense(&dense, IndexSet::new(picked).unwrap()).unwrap(),
            )
        };
        let config = TrackerConfig {
            schedule: StepSchedule::Constant { c: eta },
            ..TrackerConfig::default()
        };
        let mut tracker = GrouseTracker::from_basis(basis, config).unwrap();
        tracker.step(&obs).unwrap();
        // Angles here may wrap past 2 pi, costing a couple of digits; the
        // bound still sits orders of magnitude under the 1e-9 invariant
        // checked over long runs.
        prop_assert!(tracker.orthonormality_defect() < 1e-11);
    }
}
