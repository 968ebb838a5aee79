//! Deterministic finite-horizon LQR wrapped as a reward-maximizing MDP over
//! quadratic features `phi(x, u) = [vec(x x^T); vec(u u^T); vec(x u^T); 1]`,
//! rescaled so the feature norm stays within 1 over the configured boxes.
//! Costs are negated and affinely mapped into [0, 1] rewards, with the affine
//! shift absorbed by the constant feature coordinate.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::config::KvFile;
use crate::envs::{standard_normal, Environment, RewardNoise};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LqrConfig {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub horizon: usize,
    pub state_box: f64,
    pub control_box: f64,
    pub init_box: f64,
    /// Grid points per control dimension for the argmax fallback.
    pub control_grid: usize,
    /// Size of the state net backing the linear optimization oracle and the
    /// representative feature set.
    pub net_size: usize,
    pub gamma: f64,
    pub noise: RewardNoise,
    pub seed: u64,
}

impl LqrConfig {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, q: DMatrix<f64>, r: DMatrix<f64>, horizon: usize) -> Self {
        Self {
            a,
            b,
            q,
            r,
            horizon,
            state_box: 2.0,
            control_box: 4.0,
            init_box: 0.3,
            control_grid: 9,
            net_size: 48,
            gamma: 10.0,
            noise: RewardNoise::Bernoulli,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LqrEnv {
    cfg: LqrConfig,
    d_x: usize,
    m_u: usize,
    dim: usize,
    feat_scale: f64,
    cost_max: f64,
    /// Riccati cost-to-go matrices, index h-1 for h = 1..=H+1.
    riccati: Vec<DMatrix<f64>>,
    /// Optimal feedback gains, index h-1 for h = 1..=H.
    gains: Vec<DMatrix<f64>>,
    net: Vec<DVector<f64>>,
}

impl LqrEnv {
    pub fn new(cfg: LqrConfig) -> Result<Self> {
        let d_x = cfg.a.nrows();
        let m_u = cfg.b.ncols();
        if cfg.a.ncols() != d_x || cfg.b.nrows() != d_x {
            return Err(Error::InvalidEnv("A and B dimensions are inconsistent".into()));
        }
        if cfg.q.nrows() != d_x || cfg.q.ncols() != d_x || cfg.r.nrows() != m_u || cfg.r.ncols() != m_u {
            return Err(Error::InvalidEnv("Q or R dimensions are inconsistent".into()));
        }
        let r_min_eig = cfg.r.clone().symmetric_eigen().eigenvalues.min();
        if r_min_eig <= 0.0 {
            return Err(Error::InvalidEnv(format!(
                "R must be positive definite (min eigenvalue {r_min_eig:.3e})"
            )));
        }
        if cfg.horizon == 0 {
            return Err(Error::InvalidEnv("horizon must be at least 1".into()));
        }

        let dim = d_x * d_x + m_u * m_u + d_x * m_u + 1;
        let bx = (d_x as f64).sqrt() * cfg.state_box;
        let bu = (m_u as f64).sqrt() * cfg.control_box;
        let feat_scale = (bx.powi(4) + bu.powi(4) + bx.powi(2) * bu.powi(2) + 1.0).sqrt();
        let q_max = cfg.q.clone().symmetric_eigen().eigenvalues.max();
        let r_max = cfg.r.clone().symmetric_eigen().eigenvalues.max();
        let cost_max = q_max * bx * bx + r_max * bu * bu;

        // Finite-horizon Riccati recursion for the cost x'Qx + u'Ru.
        let mut riccati = vec![DMatrix::zeros(d_x, d_x); cfg.horizon + 1];
        let mut gains = vec![DMatrix::zeros(m_u, d_x); cfg.horizon];
        for h in (0..cfg.horizon).rev() {
            let p_next = &riccati[h + 1];
            let s = &cfg.r + cfg.b.transpose() * p_next * &cfg.b;
            let s_inv = s.clone().try_inverse().ok_or_else(|| {
                Error::InvalidEnv("R + B'PB is singular in the Riccati recursion".into())
            })?;
            let k = -(&s_inv * cfg.b.transpose() * p_next * &cfg.a);
            let p = &cfg.q + cfg.a.transpose() * p_next * &cfg.a
                - cfg.a.transpose() * p_next * &cfg.b * &s_inv * cfg.b.transpose() * p_next * &cfg.a;
            riccati[h] = p;
            gains[h] = k;
        }

        let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
        let net = (0..cfg.net_size)
            .map(|_| {
                DVector::from_fn(d_x, |_, _| (rng.random::<f64>() * 2.0 - 1.0) * cfg.state_box)
            })
            .collect();

        Ok(Self {
            cfg,
            d_x,
            m_u,
            dim,
            feat_scale,
            cost_max,
            riccati,
            gains,
            net,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.d_x
    }

    pub fn control_dim(&self) -> usize {
        self.m_u
    }

    pub fn cost(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        (&self.cfg.q * x).dot(x) + (&self.cfg.r * u).dot(u)
    }

    pub fn optimal_gain(&self, h: usize) -> &DMatrix<f64> {
        &self.gains[h - 1]
    }

    /// Optimal value from step h.
    pub fn optimal_value_at(&self, h: usize, x: &DVector<f64>) -> f64 {
        let remaining = (self.cfg.horizon - h + 1) as f64;
        remaining - (&self.riccati[h - 1] * x).dot(x) / self.cost_max
    }

    fn raw_feature(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim);
        let mut k = 0;
        for j in 0..self.d_x {
            for i in 0..self.d_x {
                v[k] = x[i] * x[j];
                k += 1;
            }
        }
        for j in 0..self.m_u {
            for i in 0..self.m_u {
                v[k] = u[i] * u[j];
                k += 1;
            }
        }
        for j in 0..self.m_u {
            for i in 0..self.d_x {
                v[k] = x[i] * u[j];
                k += 1;
            }
        }
        v[k] = 1.0;
        v
    }

    /// Splits a parameter vector into the quadratic blocks it represents on
    /// the raw (unscaled) features: `<v, raw(x,u)> = x'Mxx x + u'Muu u + x'C u + c`.
    fn quad_blocks(&self, v: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, f64) {
        let dx = self.d_x;
        let mu = self.m_u;
        let mxx = DMatrix::from_column_slice(dx, dx, &v.as_slice()[0..dx * dx]);
        let muu = DMatrix::from_column_slice(mu, mu, &v.as_slice()[dx * dx..dx * dx + mu * mu]);
        let start = dx * dx + mu * mu;
        let cross = DMatrix::from_column_slice(dx, mu, &v.as_slice()[start..start + dx * mu]);
        (mxx, muu, cross, v[self.dim - 1])
    }

    fn pack_blocks(
        &self,
        mxx: &DMatrix<f64>,
        muu: &DMatrix<f64>,
        cross: &DMatrix<f64>,
        constant: f64,
    ) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim);
        v.as_mut_slice()[0..self.d_x * self.d_x].copy_from_slice(mxx.as_slice());
        let o1 = self.d_x * self.d_x;
        v.as_mut_slice()[o1..o1 + self.m_u * self.m_u].copy_from_slice(muu.as_slice());
        let o2 = o1 + self.m_u * self.m_u;
        v.as_mut_slice()[o2..o2 + self.d_x * self.m_u].copy_from_slice(cross.as_slice());
        v[self.dim - 1] = constant;
        v
    }

    /// Unconstrained maximizer of the control quadratic when its symmetric
    /// part is negative definite.
    fn closed_form_control(
        &self,
        sym_uu: &DMatrix<f64>,
        cross: &DMatrix<f64>,
        x: &DVector<f64>,
    ) -> Option<DVector<f64>> {
        let max_eig = sym_uu.clone().symmetric_eigen().eigenvalues.max();
        if max_eig >= -1e-12 {
            return None;
        }
        let inv = sym_uu.clone().try_inverse()?;
        Some(-0.5 * (inv * (cross.transpose() * x)))
    }

    fn grid_controls(&self) -> Vec<DVector<f64>> {
        let n = self.cfg.control_grid.max(2);
        let axis: Vec<f64> = (0..n)
            .map(|i| -self.cfg.control_box + 2.0 * self.cfg.control_box * i as f64 / (n - 1) as f64)
            .collect();
        let mut points = vec![DVector::zeros(self.m_u)];
        for dim in 0..self.m_u {
            let mut next = Vec::with_capacity(points.len() * n);
            for p in &points {
                for &val in &axis {
                    let mut q = p.clone();
                    q[dim] = val;
                    next.push(q);
                }
            }
            points = next;
        }
        points
    }
}

impl Environment for LqrEnv {
    type State = DVector<f64>;
    type Action = DVector<f64>;

    fn dim(&self) -> usize {
        self.dim
    }

    fn horizon(&self) -> usize {
        self.cfg.horizon
    }

    fn feature(&self, _h: usize, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        self.raw_feature(x, u) / self.feat_scale
    }

    fn sample_initial_state(&self, rng: &mut dyn RngCore) -> DVector<f64> {
        DVector::from_fn(self.d_x, |_, _| {
            ((&mut *rng).random::<f64>() * 2.0 - 1.0) * self.cfg.init_box
        })
    }

    fn next_state(&self, _h: usize, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.cfg.a * x + &self.cfg.b * u
    }

    fn mean_reward(&self, _h: usize, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        1.0 - self.cost(x, u) / self.cost_max
    }

    fn sample_reward(
        &self,
        h: usize,
        x: &DVector<f64>,
        u: &DVector<f64>,
        rng: &mut dyn RngCore,
    ) -> f64 {
        self.cfg.noise.sample(self.mean_reward(h, x, u), rng)
    }

    fn greedy_action(&self, _h: usize, x: &DVector<f64>, param: &DVector<f64>) -> DVector<f64> {
        let (_, muu, cross, _) = self.quad_blocks(param);
        let sym_uu = 0.5 * (&muu + muu.transpose());
        if let Some(u) = self.closed_form_control(&sym_uu, &cross, x) {
            if u.amax() <= self.cfg.control_box {
                return u;
            }
        }
        // Indefinite control block or maximizer outside the box: fall back
        // to the configured finite control grid.
        let mut best: Option<(f64, DVector<f64>)> = None;
        for u in self.grid_controls() {
            let val = (&sym_uu * &u).dot(&u) + (&cross.transpose() * x).dot(&u);
            if best.as_ref().map_or(true, |(b, _)| val > *b) {
                best = Some((val, u));
            }
        }
        best.expect("control grid is nonempty").1
    }

    fn random_action(&self, _h: usize, _x: &DVector<f64>, rng: &mut dyn RngCore) -> DVector<f64> {
        DVector::from_fn(self.m_u, |_, _| {
            ((&mut *rng).random::<f64>() * 2.0 - 1.0) * self.cfg.control_box
        })
    }

    /// The backup map is stationary: the successor's value is read through
    /// the feature map at every step, with no horizon cutoff.
    fn next_state_value(
        &self,
        h: usize,
        x: &DVector<f64>,
        u: &DVector<f64>,
        param: &DVector<f64>,
    ) -> f64 {
        let next = self.next_state(h, x, u);
        let ustar = self.greedy_action(h + 1, &next, param);
        param.dot(&self.feature(h + 1, &next, &ustar))
    }

    fn design_features(&self) -> Vec<DVector<f64>> {
        // Quadratic features of net states under a few controls. Note the
        // symmetric duplication in vec(xx') means this set spans a strict
        // subspace of R^dim.
        let mut rng = ChaCha12Rng::seed_from_u64(self.cfg.seed ^ 0x5eed);
        let mut feats = Vec::new();
        for x in &self.net {
            let u = DVector::from_fn(self.m_u, |_, _| {
                (rng.random::<f64>() * 2.0 - 1.0) * self.cfg.control_box
            });
            feats.push(self.feature(1, x, &u));
        }
        feats
    }

    fn lin_opt(&self, param: &DVector<f64>) -> DVector<f64> {
        let mut best: Option<(f64, DVector<f64>)> = None;
        for x in &self.net {
            let u = self.greedy_action(1, x, param);
            let phi = self.feature(1, x, &u);
            let val = param.dot(&phi);
            if best.as_ref().map_or(true, |(b, _)| val > *b) {
                best = Some((val, phi));
            }
        }
        best.expect("state net is nonempty").1
    }

    fn lin_opt_radius(&self) -> Option<f64> {
        // Scaled basis vectors are not quadratic features of any (x, u).
        None
    }

    fn gamma(&self) -> f64 {
        self.cfg.gamma
    }

    fn optimal_value(&self, x: &DVector<f64>) -> f64 {
        self.optimal_value_at(1, x)
    }

    fn reward_param(&self, _h: usize) -> DVector<f64> {
        let beta = 1.0 / self.cost_max;
        let omega_raw = self.pack_blocks(
            &(-beta * &self.cfg.q),
            &(-beta * &self.cfg.r),
            &DMatrix::zeros(self.d_x, self.m_u),
            1.0,
        );
        self.feat_scale * omega_raw
    }

    /// Exact backup by coefficient substitution: maximize the control
    /// quadratic in closed form, then push the resulting state quadratic
    /// through `x' = Ax + Bu`.
    fn backup(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        if theta.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: theta.len(),
            });
        }
        let (mxx, muu, cross, constant) = self.quad_blocks(theta);
        let sym_uu = 0.5 * (&muu + muu.transpose());
        let max_eig = sym_uu.clone().symmetric_eigen().eigenvalues.max();
        if max_eig >= -1e-12 {
            return Err(Error::InvalidEnv(
                "backup requires a negative definite control block; the argmax is unbounded"
                    .into(),
            ));
        }
        let sym_xx = 0.5 * (&mxx + mxx.transpose());
        let uu_inv = sym_uu
            .clone()
            .try_inverse()
            .expect("negative definite block is invertible");
        let n = &sym_xx - 0.25 * &cross * &uu_inv * cross.transpose();
        let new_xx = self.cfg.a.transpose() * &n * &self.cfg.a;
        let new_uu = self.cfg.b.transpose() * &n * &self.cfg.b;
        let new_cross = 2.0 * self.cfg.a.transpose() * &n * &self.cfg.b;
        Ok(self.pack_blocks(&new_xx, &new_uu, &new_cross, constant))
    }

    fn sample_backup_probe(&self, rng: &mut dyn RngCore) -> DVector<f64> {
        let dx = self.d_x;
        let mu = self.m_u;
        let mxx = DMatrix::from_fn(dx, dx, |_, _| 0.5 * standard_normal(rng));
        // Control block forced negative definite so the backup is defined.
        let g = DMatrix::from_fn(mu, mu, |_, _| 0.5 * standard_normal(rng));
        let muu = -(&g * g.transpose() + 0.3 * DMatrix::<f64>::identity(mu, mu));
        let cross = DMatrix::from_fn(dx, mu, |_, _| 0.3 * standard_normal(rng));
        self.pack_blocks(&mxx, &muu, &cross, standard_normal(rng))
    }

    fn probe_pairs(
        &self,
        rng: &mut dyn RngCore,
        max_pairs: usize,
    ) -> Vec<(usize, DVector<f64>, DVector<f64>)> {
        let n = max_pairs.min(64);
        (0..n)
            .map(|_| {
                let h = (&mut *rng).random_range(1..=self.cfg.horizon);
                let x = DVector::from_fn(self.d_x, |_, _| {
                    ((&mut *rng).random::<f64>() * 2.0 - 1.0) * 0.3 * self.cfg.state_box
                });
                let u = DVector::from_fn(self.m_u, |_, _| {
                    ((&mut *rng).random::<f64>() * 2.0 - 1.0) * 0.3 * self.cfg.control_box
                });
                (h, x, u)
            })
            .collect()
    }

    fn validate_state(&self, h: usize, x: &DVector<f64>) -> Result<()> {
        let norm = x.amax();
        if norm > self.cfg.state_box {
            return Err(Error::StateBoxEscape {
                step: h,
                norm,
                bound: self.cfg.state_box,
            });
        }
        Ok(())
    }
}

pub(super) fn from_kv(kv: &KvFile) -> Result<LqrEnv> {
    let to_matrix = |field: &str| -> Result<DMatrix<f64>> {
        let rows = kv.get_matrix(field)?.ok_or_else(|| Error::ConfigParse {
            line: 0,
            field: field.into(),
            message: "missing required field".into(),
        })?;
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::ConfigParse {
                line: 0,
                field: field.into(),
                message: "ragged matrix rows".into(),
            });
        }
        Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
    };
    let mut cfg = LqrConfig::new(
        to_matrix("a_matrix")?,
        to_matrix("b_matrix")?,
        to_matrix("q_matrix")?,
        to_matrix("r_matrix")?,
        kv.require("horizon")?,
    );
    if let Some(v) = kv.get("state_box")? {
        cfg.state_box = v;
    }
    if let Some(v) = kv.get("control_box")? {
        cfg.control_box = v;
    }
    if let Some(v) = kv.get("init_box")? {
        cfg.init_box = v;
    }
    if let Some(v) = kv.get("control_grid")? {
        cfg.control_grid = v;
    }
    if let Some(v) = kv.get("net_size")? {
        cfg.net_size = v;
    }
    if let Some(v) = kv.get("gamma")? {
        cfg.gamma = v;
    }
    if let Some(v) = kv.get("seed")? {
        cfg.seed = v;
    }
    cfg.noise = match kv.raw("reward_noise").unwrap_or("bernoulli") {
        "bernoulli" => RewardNoise::Bernoulli,
        "none" | "deterministic" => RewardNoise::Deterministic,
        other => {
            return Err(Error::ConfigParse {
                line: 0,
                field: "reward_noise".into(),
                message: format!("unknown noise model `{other}`"),
            })
        }
    };
    LqrEnv::new(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::verify_lbc;
    use approx::assert_relative_eq;

    fn small_config() -> LqrConfig {
        let a = DMatrix::from_row_slice(2, 2, &[0.8, 0.2, -0.1, 0.7]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 0.5]);
        let q = DMatrix::identity(2, 2);
        let r = DMatrix::from_row_slice(1, 1, &[1.0]);
        LqrConfig::new(a, b, q, r, 3)
    }

    #[test]
    fn quadratic_feature_dimension() {
        let env = LqrEnv::new(small_config()).unwrap();
        assert_eq!(env.dim(), 4 + 1 + 2 + 1);
        // Features stay within the unit ball over the boxes.
        let x = DVector::from_vec(vec![2.0, -2.0]);
        let u = DVector::from_vec(vec![4.0]);
        assert!(env.feature(1, &x, &u).norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn origin_is_a_fixed_point_under_identity_dynamics() {
        let cfg = LqrConfig::new(
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            4,
        );
        let env = LqrEnv::new(cfg).unwrap();
        let origin = DVector::zeros(2);
        for h in 1..=4 {
            let u = env.optimal_gain(h) * &origin;
            assert_relative_eq!(u.norm(), 0.0);
        }
        let per_step = env.mean_reward(1, &origin, &DVector::zeros(2));
        assert_relative_eq!(env.optimal_value(&origin), 4.0 * per_step, epsilon = 1e-12);
        assert_relative_eq!(per_step, 1.0);
    }

    #[test]
    fn riccati_value_matches_control_grid_search() {
        let env = LqrEnv::new(small_config()).unwrap();
        let x0 = DVector::from_vec(vec![0.25, -0.15]);
        // Independent oracle: exhaustive open-loop search over a control
        // grid; deterministic dynamics make open loop optimal.
        let n = 41usize;
        let axis: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect();
        let mut best = f64::NEG_INFINITY;
        for &u1 in &axis {
            for &u2 in &axis {
                for &u3 in &axis {
                    let mut x = x0.clone();
                    let mut total = 0.0;
                    for (h, &uv) in [u1, u2, u3].iter().enumerate() {
                        let u = DVector::from_vec(vec![uv]);
                        total += env.mean_reward(h + 1, &x, &u);
                        x = env.next_state(h + 1, &x, &u);
                    }
                    best = best.max(total);
                }
            }
        }
        let v_star = env.optimal_value(&x0);
        assert!(v_star >= best - 1e-9, "Riccati below a feasible grid policy");
        assert!(v_star - best <= 0.02, "grid gap {} too large", v_star - best);
    }

    #[test]
    fn backup_identity_holds_pointwise() {
        let env = LqrEnv::new(small_config()).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for _ in 0..20 {
            let theta = env.sample_backup_probe(&mut rng);
            let backed = env.backup(&theta).unwrap();
            let x = DVector::from_fn(2, |_, _| rng.random::<f64>() - 0.5);
            let u = DVector::from_fn(1, |_, _| rng.random::<f64>() - 0.5);
            let lhs = backed.dot(&env.feature(1, &x, &u));
            let next = env.next_state(1, &x, &u);
            let ustar = env.greedy_action(2, &next, &theta);
            let rhs = theta.dot(&env.feature(2, &next, &ustar));
            assert!((lhs - rhs).abs() < 1e-10, "residual {}", (lhs - rhs).abs());
        }
    }

    #[test]
    fn lbc_verification_with_100_probes() {
        let env = LqrEnv::new(small_config()).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let report = verify_lbc(&env, 100, &mut rng).unwrap();
        assert!(
            report.max_backup_residual <= 1e-6,
            "backup residual {}",
            report.max_backup_residual
        );
        assert!(report.max_reward_residual <= 1e-9);
    }

    #[test]
    fn rejects_non_pd_r() {
        let mut cfg = small_config();
        cfg.r = DMatrix::from_row_slice(1, 1, &[0.0]);
        assert!(LqrEnv::new(cfg).is_err());
    }

    #[test]
    fn reports_state_box_escape() {
        let env = LqrEnv::new(small_config()).unwrap();
        let far = DVector::from_vec(vec![50.0, 0.0]);
        match env.validate_state(2, &far) {
            Err(Error::StateBoxEscape { step, .. }) => assert_eq!(step, 2),
            other => panic!("expected escape error, got {other:?}"),
        }
    }

    #[test]
    fn greedy_control_matches_grid_when_definite() {
        let env = LqrEnv::new(small_config()).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        for _ in 0..10 {
            let theta = env.sample_backup_probe(&mut rng);
            let x = DVector::from_fn(2, |_, _| rng.random::<f64>() - 0.5);
            let u_closed = env.greedy_action(1, &x, &theta);
            // Fine grid around the box for comparison.
            let n = 2001usize;
            let mut best = (f64::NEG_INFINITY, 0.0);
            for i in 0..n {
                let v = -4.0 + 8.0 * i as f64 / (n - 1) as f64;
                let u = DVector::from_vec(vec![v]);
                let val = theta.dot(&env.feature(1, &x, &u));
                if val > best.0 {
                    best = (val, v);
                }
            }
            assert!(
                (u_closed[0] - best.1).abs() <= 8.0 / (n - 1) as f64 + 1e-9,
                "closed form {} vs grid {}",
                u_closed[0],
                best.1
            );
        }
    }
}
