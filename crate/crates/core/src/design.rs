//! Approximate D-optimal designs over finite feature sets via Frank-Wolfe
//! with exact line search, certified through the Kiefer-Wolfowitz condition
//! `g(rho) = max_phi ||phi||^2_{Lambda(rho)^{-1}} <= d (1 + eps)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// Weights below this threshold are pruned and the rest renormalized.
pub const PRUNE_THRESHOLD: f64 = 1e-6;

/// A discrete design: support points with probability weights.
#[derive(Debug, Clone)]
pub struct DesignMeasure {
    pub support: Vec<DVector<f64>>,
    pub weights: Vec<f64>,
    pub dim: usize,
    /// log det Lambda(rho) after each line-search step, for monotonicity checks.
    pub log_det_trace: Vec<f64>,
}

impl DesignMeasure {
    /// Second-moment matrix `Lambda(rho) = sum_i rho_i phi_i phi_i^T`.
    pub fn lambda(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (phi, &w) in self.support.iter().zip(&self.weights) {
            m.ger(w, phi, phi, 1.0);
        }
        m
    }

    pub fn log_det(&self) -> f64 {
        log_det(&self.lambda())
    }

    pub fn support_size(&self) -> usize {
        self.support.len()
    }
}

fn log_det(m: &DMatrix<f64>) -> f64 {
    match m.clone().cholesky() {
        Some(c) => 2.0 * c.l().diagonal().iter().map(|x| x.ln()).sum::<f64>(),
        None => f64::NEG_INFINITY,
    }
}

/// Worst-case leverage of `features` under the design.
///
/// For singular `Lambda` the pseudo-inverse is used, provided every queried
/// feature lies in its range; otherwise the design cannot score the feature
/// and an error is returned.
pub fn design_g_value(design: &DesignMeasure, features: &[DVector<f64>]) -> Result<f64> {
    let lambda = design.lambda();
    let chol = lambda.clone().cholesky();
    let (inv, range_proj) = match chol {
        Some(c) => (c.inverse(), None),
        None => {
            let pinv = linalg::pseudo_inverse(&lambda);
            let proj = &lambda * &pinv;
            (pinv, Some(proj))
        }
    };
    let mut g = 0.0_f64;
    for phi in features {
        if let Some(p) = &range_proj {
            if !linalg::in_span(phi, p) {
                return Err(Error::OutOfDesignRange);
            }
        }
        let lev = linalg::quad_norm(phi, &inv)?.powi(2);
        g = g.max(lev);
    }
    Ok(g)
}

/// Frank-Wolfe iterations for the D-criterion, including away steps so the
/// support stays lean. Stops once `g(rho) <= d (1 + eps_fw)`.
///
/// Initialization is uniform over a greedily chosen spanning subset of `d`
/// features, which keeps `Lambda` invertible from the first iteration.
pub fn frank_wolfe_design(
    features: &[DVector<f64>],
    eps_fw: f64,
    max_iter: usize,
) -> Result<DesignMeasure> {
    assert!(eps_fw > 0.0, "eps_fw must be positive");
    let dim = features.first().map_or(0, |f| f.len());
    for f in features {
        if f.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: f.len(),
            });
        }
    }

    let spanning = greedy_spanning_subset(features, dim)?;
    let mut weights = vec![0.0; features.len()];
    for &idx in &spanning {
        weights[idx] = 1.0 / spanning.len() as f64;
    }

    let mut trace = Vec::new();
    // Iterate to half the requested slack so pruning and the support cap can
    // spend the other half.
    let target = dim as f64 * (1.0 + 0.5 * eps_fw);
    let g_cap = dim as f64 * (1.0 + eps_fw);
    let mut best_g = f64::INFINITY;
    for _ in 0..max_iter {
        let lambda = lambda_of(features, &weights, dim);
        let inv = match lambda.clone().cholesky() {
            Some(c) => c.inverse(),
            None => {
                return Err(Error::SingularDesign {
                    min_eig: lambda.symmetric_eigenvalues().min(),
                })
            }
        };
        trace.push(log_det(&lambda));

        // Leverage of every candidate; track the best forward atom and the
        // worst currently supported atom.
        let mut fw_idx = 0;
        let mut fw_lev = f64::NEG_INFINITY;
        let mut away_idx = None;
        let mut away_lev = f64::INFINITY;
        for (i, phi) in features.iter().enumerate() {
            let lev = (&inv * phi).dot(phi);
            if lev > fw_lev {
                fw_lev = lev;
                fw_idx = i;
            }
            if weights[i] > 0.0 && lev < away_lev {
                away_lev = lev;
                away_idx = Some(i);
            }
        }
        best_g = best_g.min(fw_lev);
        if fw_lev <= target {
            return Ok(finish(features, weights, dim, trace, g_cap));
        }

        let d = dim as f64;
        let forward_gain = fw_lev - d;
        let away_gain = away_idx.map_or(f64::NEG_INFINITY, |_| d - away_lev);
        if forward_gain >= away_gain {
            // Exact line search for the D-criterion.
            let step = (fw_lev - d) / (d * (fw_lev - 1.0));
            for w in weights.iter_mut() {
                *w *= 1.0 - step;
            }
            weights[fw_idx] += step;
        } else {
            let j = away_idx.expect("support is nonempty");
            // Negative step toward removing mass from atom j; clamp so the
            // weight stays nonnegative (hitting the clamp drops the atom).
            let unclamped = (away_lev - d) / (d * (away_lev - 1.0));
            let min_step = -weights[j] / (1.0 - weights[j]);
            let step = unclamped.max(min_step);
            for w in weights.iter_mut() {
                *w *= 1.0 - step;
            }
            weights[j] += step;
            if weights[j] < 0.0 {
                weights[j] = 0.0;
            }
            renormalize(&mut weights);
        }
    }
    Err(Error::NoCertificate { max_iter, best_g })
}

fn lambda_of(features: &[DVector<f64>], weights: &[f64], dim: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(dim, dim);
    for (phi, &w) in features.iter().zip(weights) {
        if w > 0.0 {
            m.ger(w, phi, phi, 1.0);
        }
    }
    m
}

fn renormalize(weights: &mut [f64]) {
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
}

fn finish(
    features: &[DVector<f64>],
    mut weights: Vec<f64>,
    dim: usize,
    trace: Vec<f64>,
    g_cap: f64,
) -> DesignMeasure {
    for w in weights.iter_mut() {
        if *w < PRUNE_THRESHOLD {
            *w = 0.0;
        }
    }
    renormalize(&mut weights);
    caratheodory_reduce(features, &mut weights, dim);
    enforce_support_cap(features, &mut weights, dim, g_cap);
    let (support, kept): (Vec<_>, Vec<_>) = features
        .iter()
        .zip(&weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(phi, &w)| (phi.clone(), w))
        .unzip();
    DesignMeasure {
        support,
        weights: kept,
        dim,
        log_det_trace: trace,
    }
}

/// Reduces the support to at most `d(d+1)/2` atoms without degrading the
/// certificate: the moment matrices live in a `d(d+1)/2`-dimensional space,
/// so any larger support admits a dependency that can be followed until a
/// weight hits zero while `Lambda(rho)` is preserved. The dependency sign is
/// chosen so the renormalization can only shrink the total mass, which can
/// only improve `g`.
fn caratheodory_reduce(features: &[DVector<f64>], weights: &mut [f64], dim: usize) {
    let q = dim * (dim + 1) / 2;
    loop {
        let support: Vec<usize> = (0..weights.len())
            .filter(|&i| weights[i] > 0.0)
            .collect();
        let k = support.len();
        if k <= q {
            return;
        }
        // Columns svec(phi_i phi_i^T); a null vector is a dependency among
        // the support moments that preserves Lambda.
        let mut a = DMatrix::zeros(q, k);
        for (col, &idx) in support.iter().enumerate() {
            let phi = &features[idx];
            let mut row = 0;
            for i in 0..dim {
                for j in i..dim {
                    a[(row, col)] = phi[i] * phi[j];
                    row += 1;
                }
            }
        }
        // The thin SVD yields an orthonormal basis of the row space; any
        // basis vector projected onto its complement is a dependency. With
        // k > q + 1 columns the null space is at least one-dimensional.
        let svd = a.clone().svd(false, true);
        let v_t = svd.v_t.expect("requested right singular vectors");
        let cutoff = 1e-10 * svd.singular_values.max().max(1.0);
        let mut dep: Option<DVector<f64>> = None;
        for probe in 0..k {
            let mut c = DVector::zeros(k);
            c[probe] = 1.0;
            for (row_idx, &sigma) in svd.singular_values.iter().enumerate() {
                if sigma > cutoff {
                    let row = v_t.row(row_idx).transpose();
                    let coef = row.dot(&c);
                    c.axpy(-coef, &row, 1.0);
                }
            }
            if c.norm() > 1e-8 {
                dep = Some(c.normalize());
                break;
            }
        }
        let Some(dep) = dep else { return };
        let mut dep: Vec<f64> = dep.iter().cloned().collect();
        if dep.iter().sum::<f64>() < 0.0 {
            for c in dep.iter_mut() {
                *c = -*c;
            }
        }
        let mut t = f64::INFINITY;
        for (col, &idx) in support.iter().enumerate() {
            if dep[col] > 1e-14 {
                t = t.min(weights[idx] / dep[col]);
            }
        }
        if !t.is_finite() {
            return;
        }
        for (col, &idx) in support.iter().enumerate() {
            weights[idx] = (weights[idx] - t * dep[col]).max(0.0);
        }
        renormalize(weights);
    }
}

/// Drops the lightest support atoms, one at a time, while the certificate
/// `g <= g_cap` survives, until the support fits in `d(d+1)/2`.
fn enforce_support_cap(features: &[DVector<f64>], weights: &mut [f64], dim: usize, g_cap: f64) {
    let cap = dim * (dim + 1) / 2;
    loop {
        let support: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
        if support.len() <= cap {
            return;
        }
        let mut order = support.clone();
        order.sort_by(|&a, &b| weights[a].total_cmp(&weights[b]));
        let mut dropped = false;
        for &candidate in &order {
            let mut trial = weights.to_vec();
            trial[candidate] = 0.0;
            renormalize(&mut trial);
            let lambda = lambda_of(features, &trial, dim);
            if let Some(chol) = lambda.cholesky() {
                let inv = chol.inverse();
                let g = features
                    .iter()
                    .map(|phi| (&inv * phi).dot(phi))
                    .fold(0.0_f64, f64::max);
                if g <= g_cap {
                    weights.copy_from_slice(&trial);
                    dropped = true;
                    break;
                }
            }
        }
        if !dropped {
            return;
        }
    }
}

/// Greedily picks `dim` features of maximal residual norm, growing the span
/// one direction at a time. Errors if the set does not span R^dim.
fn greedy_spanning_subset(features: &[DVector<f64>], dim: usize) -> Result<Vec<usize>> {
    let mut chosen = Vec::with_capacity(dim);
    let mut tracker = linalg::SpanTracker::new(dim);
    while chosen.len() < dim {
        let projector = tracker.projector().clone();
        let mut best: Option<(usize, f64)> = None;
        for (i, phi) in features.iter().enumerate() {
            let residual = (phi - &projector * phi).norm();
            if best.map_or(true, |(_, r)| residual > r) {
                best = Some((i, residual));
            }
        }
        match best {
            Some((i, r)) if r > linalg::TAU_SPAN => {
                chosen.push(i);
                tracker.insert(&features[i])?;
            }
            _ => {
                return Err(Error::RankDeficient {
                    dim,
                    rank: chosen.len(),
                })
            }
        }
    }
    Ok(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn basis(dim: usize) -> Vec<DVector<f64>> {
        (0..dim)
            .map(|i| DVector::from_fn(dim, |j, _| if i == j { 1.0 } else { 0.0 }))
            .collect()
    }

    fn random_unit_vectors(n: usize, dim: usize, seed: u64) -> Vec<DVector<f64>> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let v = DVector::from_fn(dim, |_, _| rng.random::<f64>() * 2.0 - 1.0);
                let n = v.norm();
                v / n.max(1e-12)
            })
            .collect()
    }

    /// Reference solver: Titterington's multiplicative update, monotone for
    /// the D-criterion and entirely independent of the Frank-Wolfe path.
    fn multiplicative_reference(features: &[DVector<f64>], iters: usize) -> (Vec<f64>, f64) {
        let dim = features[0].len();
        let n = features.len();
        let mut weights = vec![1.0 / n as f64; n];
        for _ in 0..iters {
            let lambda = lambda_of(features, &weights, dim);
            let inv = lambda.cholesky().unwrap().inverse();
            for (i, phi) in features.iter().enumerate() {
                weights[i] *= (&inv * phi).dot(phi) / dim as f64;
            }
            renormalize(&mut weights);
        }
        let lambda = lambda_of(features, &weights, dim);
        (weights, log_det(&lambda))
    }

    #[test]
    fn two_basis_vectors_get_uniform_weights() {
        let design = frank_wolfe_design(&basis(2), 0.01, 1000).unwrap();
        assert_eq!(design.support_size(), 2);
        for &w in &design.weights {
            assert_relative_eq!(w, 0.5, epsilon = 1e-9);
        }
        let g = design_g_value(&design, &basis(2)).unwrap();
        assert_relative_eq!(g, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn orthonormal_basis_is_exactly_optimal() {
        for dim in [3usize, 5, 8] {
            let feats = basis(dim);
            let design = frank_wolfe_design(&feats, 0.01, 1000).unwrap();
            for &w in &design.weights {
                assert_relative_eq!(w, 1.0 / dim as f64, epsilon = 1e-9);
            }
            assert_relative_eq!(
                design.log_det(),
                -(dim as f64) * (dim as f64).ln(),
                epsilon = 1e-9
            );
            let g = design_g_value(&design, &feats).unwrap();
            assert!((g - dim as f64).abs() <= 1e-9);
        }
    }

    #[test]
    fn random_unit_vectors_certified_and_cross_checked() {
        let feats = random_unit_vectors(50, 3, 42);
        let design = frank_wolfe_design(&feats, 0.01, 20_000).unwrap();
        let g = design_g_value(&design, &feats).unwrap();
        assert!(g <= 3.03, "g = {}", g);
        // The reference multiplicative algorithm should find essentially the
        // same log det.
        let (_, ref_log_det) = multiplicative_reference(&feats, 2000);
        assert!(
            design.log_det() >= ref_log_det - 1e-3,
            "Frank-Wolfe log det {} below reference {}",
            design.log_det(),
            ref_log_det
        );
    }

    #[test]
    fn g_value_examples() {
        // Single-point design: Lambda restricted to its range.
        let e1 = DVector::from_vec(vec![1.0, 0.0]);
        let design = DesignMeasure {
            support: vec![e1.clone()],
            weights: vec![1.0],
            dim: 2,
            log_det_trace: vec![],
        };
        let g = design_g_value(&design, &[e1.clone()]).unwrap();
        assert_relative_eq!(g, 1.0, epsilon = 1e-10);
        // Out-of-range query is rejected.
        let e2 = DVector::from_vec(vec![0.0, 1.0]);
        assert!(design_g_value(&design, &[e2]).is_err());

        // Four diagonal unit vectors: Lambda = I/2, every leverage is 2.
        let s = 1.0 / 2.0_f64.sqrt();
        let diag: Vec<_> = [(s, s), (s, -s), (-s, s), (-s, -s)]
            .iter()
            .map(|&(a, b)| DVector::from_vec(vec![a, b]))
            .collect();
        let design = DesignMeasure {
            support: diag.clone(),
            weights: vec![0.25; 4],
            dim: 2,
            log_det_trace: vec![],
        };
        let g = design_g_value(&design, &diag).unwrap();
        assert_relative_eq!(g, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn non_spanning_features_are_rejected() {
        let feats = vec![
            DVector::from_vec(vec![1.0, 0.0]),
            DVector::from_vec(vec![0.5, 0.0]),
        ];
        match frank_wolfe_design(&feats, 0.01, 100) {
            Err(Error::RankDeficient { dim, rank }) => {
                assert_eq!(dim, 2);
                assert_eq!(rank, 1);
            }
            other => panic!("expected rank deficiency, got {:?}", other.map(|d| d.support_size())),
        }
    }

    #[test]
    fn kiefer_wolfowitz_bounds_and_support_cap() {
        for seed in 0..10u64 {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let dim = rng.random_range(2..7);
            let n = rng.random_range(dim..60);
            let feats = random_unit_vectors(n, dim, seed.wrapping_mul(77).wrapping_add(5));
            if let Ok(design) = frank_wolfe_design(&feats, 0.01, 20_000) {
                let g = design_g_value(&design, &feats).unwrap();
                assert!(g >= dim as f64 - 1e-9, "g < d cannot happen");
                assert!(g <= dim as f64 * 1.01 + 1e-9);
                assert!(design.support_size() <= dim * (dim + 1) / 2);
                let total: f64 = design.weights.iter().sum();
                assert!((total - 1.0).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn log_det_is_monotone_across_iterations() {
        let feats = random_unit_vectors(40, 4, 9);
        let design = frank_wolfe_design(&feats, 0.005, 20_000).unwrap();
        for pair in design.log_det_trace.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-9);
        }
    }
}
