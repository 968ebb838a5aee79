//! Dense linear-algebra kernels shared by every module: orthogonal projections
//! onto data spans, Moore-Penrose pseudo-inverses, quadratic norms, and span
//! membership tests.
//!
//! All matrices here are small (d <= ~64) and dense. Projections go through an
//! SVD of the stacked data matrix rather than normal equations because the
//! adversarial fixtures contain nearly collinear features.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative singular-value cutoff for rank detection.
pub const TAU_RANK: f64 = 1e-8;
/// Absolute-relative hybrid tolerance for the span membership test.
pub const TAU_SPAN: f64 = 1e-8;
/// Symmetry tolerance for PSD matrices.
pub const TAU_SYM: f64 = 1e-10;
/// Eigenvalue floor below which a PSD matrix is considered invalid.
pub const TAU_PSD: f64 = 1e-9;

/// Orthogonal projector onto the span of `data`, each vector of length `dim`.
///
/// Singular values below `TAU_RANK * sigma_max` are treated as zero, so
/// duplicated or nearly collinear directions collapse to a single rank.
/// An empty list yields the zero matrix.
pub fn projection_onto_span(data: &[DVector<f64>], dim: usize) -> Result<DMatrix<f64>> {
    for v in data {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: v.len(),
            });
        }
    }
    if data.is_empty() {
        return Ok(DMatrix::zeros(dim, dim));
    }
    // Stack the data as rows; the right singular vectors with non-negligible
    // singular values form an orthonormal basis of the span.
    let stacked = DMatrix::from_fn(data.len(), dim, |i, j| data[i][j]);
    let svd = stacked.svd(false, true);
    let v_t = svd
        .v_t
        .expect("SVD of a data matrix always yields right singular vectors");
    let sigma_max = svd.singular_values.max();
    if sigma_max <= 0.0 {
        return Ok(DMatrix::zeros(dim, dim));
    }
    let cutoff = TAU_RANK * sigma_max;
    let mut projector = DMatrix::zeros(dim, dim);
    for (k, &sigma) in svd.singular_values.iter().enumerate() {
        if sigma > cutoff {
            let row = v_t.row(k);
            // P += v v^T for each retained right singular vector.
            for i in 0..dim {
                for j in 0..dim {
                    projector[(i, j)] += row[i] * row[j];
                }
            }
        }
    }
    Ok(projector)
}

/// Numerical rank of a projector (its trace rounded to the nearest integer).
pub fn projector_rank(p: &DMatrix<f64>) -> usize {
    p.trace().round() as usize
}

/// Moore-Penrose pseudo-inverse of a symmetric PSD matrix, with the same
/// relative rank cutoff as `projection_onto_span`.
pub fn pseudo_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let dim = m.nrows();
    let eig = m.clone().symmetric_eigen();
    let max_eig = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    if max_eig <= 0.0 {
        return DMatrix::zeros(dim, dim);
    }
    let cutoff = TAU_RANK * max_eig;
    let mut inv_diag = DVector::zeros(dim);
    for k in 0..dim {
        let lambda = eig.eigenvalues[k];
        if lambda > cutoff {
            inv_diag[k] = 1.0 / lambda;
        }
    }
    &eig.eigenvectors * DMatrix::from_diagonal(&inv_diag) * eig.eigenvectors.transpose()
}

/// Quadratic norm `||x||_M = sqrt(max(x^T M x, 0))`.
pub fn quad_norm(x: &DVector<f64>, m: &DMatrix<f64>) -> Result<f64> {
    if x.len() != m.nrows() || m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: x.len(),
        });
    }
    let q = (m * x).dot(x);
    Ok(q.max(0.0).sqrt())
}

/// Span membership: `||(I - P) x||_2 <= TAU_SPAN * max(||x||_2, 1)`.
///
/// The hybrid absolute-relative bound keeps the test meaningful for
/// near-zero features.
pub fn in_span(x: &DVector<f64>, projector: &DMatrix<f64>) -> bool {
    let residual = x - projector * x;
    residual.norm() <= TAU_SPAN * x.norm().max(1.0)
}

/// Symmetric square root of a PSD matrix with eigenvalues floored at `floor`.
pub fn psd_sqrt(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let sqrt_diag = DVector::from_iterator(
        m.nrows(),
        eig.eigenvalues.iter().map(|&l| l.max(floor).sqrt()),
    );
    &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_diag) * eig.eigenvectors.transpose()
}

/// Inverse symmetric square root of a positive definite matrix.
pub fn pd_inv_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = m.clone().symmetric_eigen();
    let min_eig = eig.eigenvalues.min();
    if min_eig <= 0.0 {
        return Err(Error::SingularDesign { min_eig });
    }
    let diag = DVector::from_iterator(
        m.nrows(),
        eig.eigenvalues.iter().map(|&l| 1.0 / l.sqrt()),
    );
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&diag) * eig.eigenvectors.transpose())
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn pd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or(Error::SingularDesign { min_eig: f64::NAN })
}

/// Frobenius distance `||A - B||_F`, used by the projector invariants.
pub fn frob_dist(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm()
}

/// Incrementally maintained span of a stream of feature vectors.
///
/// Only vectors that actually grow the span are retained, so recomputing the
/// projector is an SVD of at most `d` rows. The resulting projector matches
/// `projection_onto_span` on the full history because appending an in-span
/// vector leaves the projector unchanged.
#[derive(Debug, Clone)]
pub struct SpanTracker {
    dim: usize,
    basis: Vec<DVector<f64>>,
    projector: DMatrix<f64>,
}

impl SpanTracker {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            basis: Vec::new(),
            projector: DMatrix::zeros(dim, dim),
        }
    }

    pub fn projector(&self) -> &DMatrix<f64> {
        &self.projector
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        in_span(x, &self.projector)
    }

    /// Inserts a vector; returns true when the span grew.
    pub fn insert(&mut self, x: &DVector<f64>) -> Result<bool> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if self.contains(x) {
            return Ok(false);
        }
        self.basis.push(x.clone());
        self.projector = projection_onto_span(&self.basis, self.dim)?;
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn vec2(a: f64, b: f64) -> DVector<f64> {
        DVector::from_vec(vec![a, b])
    }

    #[test]
    fn empty_span_projects_to_zero() {
        let p = projection_onto_span(&[], 2).unwrap();
        assert_eq!(p, DMatrix::zeros(2, 2));
    }

    #[test]
    fn axis_aligned_projector() {
        let p = projection_onto_span(&[vec2(1.0, 0.0)], 2).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(frob_dist(&p, &expected) < 1e-12);
    }

    #[test]
    fn duplicate_direction_collapses_to_rank_one() {
        let s = 2.0_f64.sqrt();
        let data = vec![vec2(1.0 / s, 1.0 / s), vec2(2.0 / 8.0_f64.sqrt(), 2.0 / 8.0_f64.sqrt())];
        let p = projection_onto_span(&data, 2).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        assert!(frob_dist(&p, &expected) < 1e-10);
        assert_eq!(projector_rank(&p), 1);
    }

    #[test]
    fn pseudo_inverse_identity() {
        let id = DMatrix::identity(3, 3);
        assert!(frob_dist(&pseudo_inverse(&id), &id) < 1e-12);
    }

    #[test]
    fn pseudo_inverse_diagonal() {
        let m = DMatrix::from_diagonal(&vec2(2.0, 0.0));
        let expected = DMatrix::from_diagonal(&vec2(0.5, 0.0));
        assert!(frob_dist(&pseudo_inverse(&m), &expected) < 1e-12);
    }

    #[test]
    fn pseudo_inverse_satisfies_m_mp_m() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..20 {
            // Rank-deficient Gram matrix G^T G with 2 factors in R^4.
            let g = DMatrix::from_fn(2, 4, |_, _| rng.random::<f64>() - 0.5);
            let m = g.transpose() * &g;
            let mp = pseudo_inverse(&m);
            let recon = &m * &mp * &m;
            assert!(frob_dist(&recon, &m) < 1e-8, "M M+ M != M");
        }
    }

    #[test]
    fn pseudo_inverse_of_projector_is_projector() {
        let data = vec![vec2(1.0, 1.0), vec2(1.0, 1.0)];
        let p = projection_onto_span(&data, 2).unwrap();
        assert!(frob_dist(&pseudo_inverse(&p), &p) < 1e-10);
    }

    #[test]
    fn quad_norm_examples() {
        let id = DMatrix::identity(2, 2);
        assert_relative_eq!(quad_norm(&vec2(1.0, 0.0), &id).unwrap(), 1.0);
        assert_relative_eq!(quad_norm(&vec2(3.0, 4.0), &id).unwrap(), 5.0);
        let m = DMatrix::from_diagonal(&vec2(4.0, 9.0));
        assert_relative_eq!(quad_norm(&vec2(1.0, 0.0), &m).unwrap(), 2.0);
    }

    #[test]
    fn quad_norm_dimension_mismatch() {
        let id = DMatrix::identity(3, 3);
        assert!(quad_norm(&vec2(1.0, 0.0), &id).is_err());
    }

    #[test]
    fn in_span_examples() {
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(in_span(&vec2(1.0, 0.0), &p));
        assert!(!in_span(&vec2(0.0, 1.0), &p));
        assert!(in_span(&vec2(1.0, 1e-12), &p));
    }

    #[test]
    fn appending_in_span_vector_leaves_projector_unchanged() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..10 {
            let a = DVector::from_fn(4, |_, _| rng.random::<f64>() - 0.5);
            let b = DVector::from_fn(4, |_, _| rng.random::<f64>() - 0.5);
            let p1 = projection_onto_span(&[a.clone(), b.clone()], 4).unwrap();
            let c = 0.3 * &a - 1.7 * &b;
            let p2 = projection_onto_span(&[a, b, c], 4).unwrap();
            assert!(frob_dist(&p1, &p2) <= 1e-8);
        }
    }

    #[test]
    fn cauchy_schwarz_under_pseudo_inverse() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..50 {
            let g = DMatrix::from_fn(3, 5, |_, _| rng.random::<f64>() - 0.5);
            let m = g.transpose() * &g;
            let mp = pseudo_inverse(&m);
            // Project x into range(M) (= row space of G).
            let raw = DVector::from_fn(5, |_, _| rng.random::<f64>() - 0.5);
            let p = &m * &mp;
            let x = &p * raw;
            let y = DVector::from_fn(5, |_, _| rng.random::<f64>() - 0.5);
            let lhs = x.dot(&y).abs();
            let rhs = quad_norm(&x, &mp).unwrap() * quad_norm(&y, &m).unwrap();
            assert!(lhs <= rhs + 1e-9, "Cauchy-Schwarz violated: {} > {}", lhs, rhs);
        }
    }

    #[test]
    fn span_tracker_matches_full_projection() {
        let mut rng = ChaCha12Rng::seed_from_u64(19);
        let mut tracker = SpanTracker::new(5);
        let mut all = Vec::new();
        for _ in 0..12 {
            let v = DVector::from_fn(5, |_, _| rng.random::<f64>() - 0.5);
            all.push(v.clone());
            tracker.insert(&v).unwrap();
            let full = projection_onto_span(&all, 5).unwrap();
            assert!(frob_dist(tracker.projector(), &full) < 1e-8);
        }
    }

    proptest! {
        #[test]
        fn projectors_are_idempotent_and_symmetric(seed in 0u64..500, n in 1usize..6, dim in 1usize..6) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let data: Vec<_> = (0..n)
                .map(|_| DVector::from_fn(dim, |_, _| rng.random::<f64>() * 2.0 - 1.0))
                .collect();
            let p = projection_onto_span(&data, dim).unwrap();
            prop_assert!(frob_dist(&(&p * &p), &p) <= 1e-8);
            prop_assert!(frob_dist(&p.transpose(), &p) <= 1e-10);
        }
    }
}
