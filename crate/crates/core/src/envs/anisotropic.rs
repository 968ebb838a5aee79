//! The two-state, single-action environment whose features are scaled by a
//! small factor on the initial state, making the Bellman backup amplify
//! parameter norms by `1 / eps_scale`. Horizon 1; used as an adversarial
//! fixture for the backup machinery.

use nalgebra::DVector;
use rand::RngCore;

use crate::envs::Environment;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct AnisotropicEnv {
    eps_scale: f64,
}

impl AnisotropicEnv {
    pub fn new(eps_scale: f64) -> Result<Self> {
        if !(eps_scale > 0.0 && eps_scale <= 1.0) {
            return Err(Error::InvalidEnv(format!(
                "eps_scale must lie in (0, 1], got {eps_scale}"
            )));
        }
        Ok(Self { eps_scale })
    }

    pub fn eps_scale(&self) -> f64 {
        self.eps_scale
    }
}

/// State 0 is the initial state with feature `(eps, 0)`; state 1 is the
/// successor with feature `(1, 0)`.
impl Environment for AnisotropicEnv {
    type State = usize;
    type Action = usize;

    fn dim(&self) -> usize {
        2
    }

    fn horizon(&self) -> usize {
        1
    }

    fn feature(&self, _h: usize, state: &usize, _action: &usize) -> DVector<f64> {
        match state {
            0 => DVector::from_vec(vec![self.eps_scale, 0.0]),
            _ => DVector::from_vec(vec![1.0, 0.0]),
        }
    }

    fn sample_initial_state(&self, _rng: &mut dyn RngCore) -> usize {
        0
    }

    fn next_state(&self, _h: usize, _state: &usize, _action: &usize) -> usize {
        1
    }

    fn mean_reward(&self, h: usize, state: &usize, action: &usize) -> f64 {
        self.reward_param(h).dot(&self.feature(h, state, action))
    }

    fn sample_reward(
        &self,
        h: usize,
        state: &usize,
        action: &usize,
        rng: &mut dyn RngCore,
    ) -> f64 {
        crate::envs::RewardNoise::Bernoulli.sample(self.mean_reward(h, state, action), rng)
    }

    fn greedy_action(&self, _h: usize, _state: &usize, _param: &DVector<f64>) -> usize {
        0
    }

    fn random_action(&self, _h: usize, _state: &usize, _rng: &mut dyn RngCore) -> usize {
        0
    }

    /// The successor state's value is read through its feature even though
    /// the episode ends after step 1; the backup map is defined over the
    /// whole feature set.
    fn next_state_value(
        &self,
        _h: usize,
        _state: &usize,
        _action: &usize,
        param: &DVector<f64>,
    ) -> f64 {
        param[0]
    }

    fn design_features(&self) -> Vec<DVector<f64>> {
        vec![
            DVector::from_vec(vec![self.eps_scale, 0.0]),
            DVector::from_vec(vec![1.0, 0.0]),
        ]
    }

    fn lin_opt(&self, param: &DVector<f64>) -> DVector<f64> {
        let feats = self.design_features();
        let mut best = 0;
        if param.dot(&feats[1]) > param.dot(&feats[0]) {
            best = 1;
        }
        feats[best].clone()
    }

    fn lin_opt_radius(&self) -> Option<f64> {
        // The second basis direction never appears in the feature set.
        None
    }

    fn gamma(&self) -> f64 {
        // The smallest nonzero Gram eigenvalue over subsets is eps^2.
        1.0 / self.eps_scale
    }

    fn optimal_value(&self, _state: &usize) -> f64 {
        self.eps_scale
    }

    fn reward_param(&self, _h: usize) -> DVector<f64> {
        DVector::from_vec(vec![1.0, 0.0])
    }

    /// For `theta = (a, b)` the backup is `(a / eps, 0)`.
    fn backup(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        if theta.len() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: theta.len(),
            });
        }
        Ok(DVector::from_vec(vec![theta[0] / self.eps_scale, 0.0]))
    }

    fn probe_pairs(&self, _rng: &mut dyn RngCore, _max: usize) -> Vec<(usize, usize, usize)> {
        vec![(1, 0, 0)]
    }
}
