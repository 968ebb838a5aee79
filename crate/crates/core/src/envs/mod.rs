//! Deterministic-transition environments with linear Bellman complete feature
//! maps, exact ground-truth oracles, and the verification machinery that
//! checks the completeness contract.
//!
//! Horizons are 1-based throughout: an episode visits steps `h = 1..=H`.

mod anisotropic;
mod lqr;
mod tabular;

pub use anisotropic::AnisotropicEnv;
pub use lqr::{LqrConfig, LqrEnv};
pub use tabular::{LayerSpec, TabularBuilder, TabularEnv};

use nalgebra::DVector;
use rand::RngCore;

use crate::config::KvFile;
use crate::error::{Error, Result};

/// Reward observation model. The default Bernoulli model has the maximal
/// variance compatible with rewards bounded in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RewardNoise {
    #[default]
    Bernoulli,
    Deterministic,
}

impl RewardNoise {
    pub fn sample(self, mean: f64, rng: &mut dyn RngCore) -> f64 {
        match self {
            RewardNoise::Deterministic => mean,
            RewardNoise::Bernoulli => {
                let p = mean.clamp(0.0, 1.0);
                if rand::Rng::random::<f64>(&mut &mut *rng) < p {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// A finite-horizon MDP with deterministic transitions, stochastic rewards
/// and initial states, and a feature map shared with the learner.
pub trait Environment {
    type State: Clone + PartialEq + std::fmt::Debug;
    type Action: Clone + PartialEq + std::fmt::Debug;

    fn dim(&self) -> usize;
    fn horizon(&self) -> usize;

    /// Claimed inherent Bellman error bound of this environment.
    fn eps_b(&self) -> f64 {
        0.0
    }

    fn feature(&self, h: usize, state: &Self::State, action: &Self::Action) -> DVector<f64>;
    fn sample_initial_state(&self, rng: &mut dyn RngCore) -> Self::State;
    fn next_state(&self, h: usize, state: &Self::State, action: &Self::Action) -> Self::State;
    fn mean_reward(&self, h: usize, state: &Self::State, action: &Self::Action) -> f64;
    fn sample_reward(
        &self,
        h: usize,
        state: &Self::State,
        action: &Self::Action,
        rng: &mut dyn RngCore,
    ) -> f64;

    /// Action attaining `max_a <param, phi(s, a)>`. Ties break toward the
    /// lowest action index.
    fn greedy_action(&self, h: usize, state: &Self::State, param: &DVector<f64>) -> Self::Action;
    fn random_action(&self, h: usize, state: &Self::State, rng: &mut dyn RngCore) -> Self::Action;

    /// `max_a <param, phi(s, a)>` at step `h`; zero beyond the horizon.
    fn state_value(&self, h: usize, state: &Self::State, param: &DVector<f64>) -> f64 {
        if h > self.horizon() {
            return 0.0;
        }
        let a = self.greedy_action(h, state, param);
        param.dot(&self.feature(h, state, &a))
    }

    /// Value of the state reached from `(h, s, a)` under `param`, as read by
    /// the Bellman backup. Defaults to zero past the last step.
    fn next_state_value(
        &self,
        h: usize,
        state: &Self::State,
        action: &Self::Action,
        param: &DVector<f64>,
    ) -> f64 {
        if h >= self.horizon() {
            return 0.0;
        }
        let next = self.next_state(h, state, action);
        self.state_value(h + 1, &next, param)
    }

    /// Finite representative feature set used for the D-optimal design.
    fn design_features(&self) -> Vec<DVector<f64>>;

    /// Feature attaining `max_{s,a} <param, phi(s, a)>` over the feature set.
    fn lin_opt(&self, param: &DVector<f64>) -> DVector<f64>;

    /// Radius `R` such that `e_i / R` belongs to the feature set for every
    /// basis direction, when one exists.
    fn lin_opt_radius(&self) -> Option<f64>;

    /// Eigenvalue-floor constant: nonzero eigenvalues of any Gram matrix of
    /// at most `d` features are at least `1 / gamma^2`.
    fn gamma(&self) -> f64;

    /// Exact optimal value from the first step.
    fn optimal_value(&self, state: &Self::State) -> f64;

    /// True reward parameter at step `h`.
    fn reward_param(&self, h: usize) -> DVector<f64>;

    /// Exact Bellman backup map applied to `theta`.
    fn backup(&self, theta: &DVector<f64>) -> Result<DVector<f64>>;

    /// Parameter vectors that the backup verification probes with.
    fn sample_backup_probe(&self, rng: &mut dyn RngCore) -> DVector<f64> {
        DVector::from_fn(self.dim(), |_, _| standard_normal(rng))
    }

    /// State-action pairs probed by the verification; at most `max_pairs`.
    fn probe_pairs(
        &self,
        rng: &mut dyn RngCore,
        max_pairs: usize,
    ) -> Vec<(usize, Self::State, Self::Action)>;

    /// Runtime state validation hook (e.g. trajectories escaping a box).
    fn validate_state(&self, _h: usize, _state: &Self::State) -> Result<()> {
        Ok(())
    }
}

pub(crate) fn standard_normal(rng: &mut dyn RngCore) -> f64 {
    use rand_distr::Distribution;
    rand_distr::StandardNormal.sample(&mut &mut *rng)
}

/// Outcome of checking the linear Bellman completeness contract.
#[derive(Debug, Clone)]
pub struct LbcReport {
    pub probes: usize,
    pub pairs_checked: usize,
    pub max_backup_residual: f64,
    pub max_reward_residual: f64,
    pub eps_b: f64,
    pub is_lbc: bool,
}

impl LbcReport {
    pub fn max_violation(&self) -> f64 {
        self.max_backup_residual.max(self.max_reward_residual)
    }
}

impl std::fmt::Display for LbcReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.eps_b == 0.0 && self.max_violation() <= 1e-9 {
            write!(
                f,
                "LBC exact (max residual <= 1e-9; backup {:.3e}, reward {:.3e}; {} probes x {} pairs)",
                self.max_backup_residual, self.max_reward_residual, self.probes, self.pairs_checked
            )
        } else {
            write!(
                f,
                "LBC residual: backup {:.3e}, reward {:.3e}, bound eps_B = {} -> {} ({} probes x {} pairs)",
                self.max_backup_residual,
                self.max_reward_residual,
                self.eps_b,
                if self.is_lbc { "ok" } else { "VIOLATED" },
                self.probes,
                self.pairs_checked
            )
        }
    }
}

/// Slack added to `eps_b` when deciding whether residuals flag a violation.
pub const LBC_TOLERANCE: f64 = 1e-7;

/// Checks Definition-style linear Bellman completeness on random parameter
/// probes: for every probed `theta` and state-action pair,
/// `|<T theta, phi(s,a)> - max_a' <theta, phi(s',a')>|` must stay within the
/// environment's claimed inherent Bellman error. Mean rewards are checked
/// against `<omega*, phi>` the same way.
pub fn verify_lbc<E: Environment>(env: &E, num_probes: usize, rng: &mut dyn RngCore) -> Result<LbcReport> {
    let pairs = env.probe_pairs(rng, 512);
    let mut max_backup = 0.0_f64;
    for _ in 0..num_probes {
        let theta = env.sample_backup_probe(rng);
        let backed = env.backup(&theta)?;
        for (h, s, a) in &pairs {
            let lhs = backed.dot(&env.feature(*h, s, a));
            let rhs = env.next_state_value(*h, s, a, &theta);
            max_backup = max_backup.max((lhs - rhs).abs());
        }
    }
    let mut max_reward = 0.0_f64;
    for (h, s, a) in &pairs {
        let mean = env.mean_reward(*h, s, a);
        let lin = env.reward_param(*h).dot(&env.feature(*h, s, a));
        max_reward = max_reward.max((mean - lin).abs());
    }
    let eps_b = env.eps_b();
    let bound = eps_b + LBC_TOLERANCE;
    Ok(LbcReport {
        probes: num_probes,
        pairs_checked: pairs.len(),
        max_backup_residual: max_backup,
        max_reward_residual: max_reward,
        eps_b,
        is_lbc: max_backup <= bound && max_reward <= bound,
    })
}

/// An environment loaded from a spec file.
pub enum ParsedEnv {
    Tabular(TabularEnv),
    Anisotropic(AnisotropicEnv),
    Lqr(LqrEnv),
}

impl ParsedEnv {
    pub fn kind(&self) -> &'static str {
        match self {
            ParsedEnv::Tabular(_) => "tabular",
            ParsedEnv::Anisotropic(_) => "anisotropic",
            ParsedEnv::Lqr(_) => "lqr",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ParsedEnv::Tabular(e) => e.dim(),
            ParsedEnv::Anisotropic(e) => e.dim(),
            ParsedEnv::Lqr(e) => e.dim(),
        }
    }

    pub fn horizon(&self) -> usize {
        match self {
            ParsedEnv::Tabular(e) => e.horizon(),
            ParsedEnv::Anisotropic(e) => e.horizon(),
            ParsedEnv::Lqr(e) => e.horizon(),
        }
    }
}

/// Parses an environment spec in the flat `key = value` format.
pub fn parse_env_spec(text: &str) -> Result<ParsedEnv> {
    let kv = KvFile::parse(text)?;
    let kind = kv
        .raw("kind")
        .ok_or_else(|| Error::ConfigParse {
            line: 0,
            field: "kind".into(),
            message: "missing required field".into(),
        })?
        .to_string();
    match kind.as_str() {
        "tabular" => tabular::from_kv(&kv).map(ParsedEnv::Tabular),
        "anisotropic" => {
            let eps_scale: f64 = kv.require("eps_scale")?;
            Ok(ParsedEnv::Anisotropic(AnisotropicEnv::new(eps_scale)?))
        }
        "lqr" => lqr::from_kv(&kv).map(ParsedEnv::Lqr),
        other => Err(Error::ConfigParse {
            line: 0,
            field: "kind".into(),
            message: format!("unknown environment kind `{other}`"),
        }),
    }
}

pub fn load_env_spec(path: &std::path::Path) -> Result<ParsedEnv> {
    parse_env_spec(&std::fs::read_to_string(path)?)
}
