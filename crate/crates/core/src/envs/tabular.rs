//! Layered tabular MDPs with one-hot features over the (layer, state, action)
//! triples. Transitions are deterministic; rewards are stochastic with linear
//! means, optionally perturbed by a bounded offset to realize a nonzero
//! inherent Bellman error.

use nalgebra::DVector;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::config::KvFile;
use crate::envs::{Environment, RewardNoise};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub states: usize,
    pub actions: usize,
}

#[derive(Debug, Clone)]
pub struct TabularEnv {
    layers: Vec<LayerSpec>,
    dim: usize,
    offsets: Vec<usize>,
    /// `transitions[h-1][s][a]` is the next state index in layer `h+1`.
    transitions: Vec<Vec<Vec<usize>>>,
    /// Actual mean rewards, including any perturbation.
    mean_rewards: Vec<Vec<Vec<f64>>>,
    /// Linear part of the rewards (the true omega*), before perturbation.
    base_rewards: Vec<Vec<Vec<f64>>>,
    noise: RewardNoise,
    init_states: Vec<usize>,
    eps_b: f64,
    v_star: Vec<Vec<f64>>,
    pi_star: Vec<Vec<usize>>,
}

/// Explicit construction of a layered tabular MDP.
#[derive(Debug, Clone)]
pub struct TabularBuilder {
    pub layers: Vec<LayerSpec>,
    pub transitions: Vec<Vec<Vec<usize>>>,
    pub rewards: Vec<Vec<Vec<f64>>>,
    pub noise: RewardNoise,
    pub init_states: Vec<usize>,
    /// Perturb mean rewards by a seeded uniform offset in `[-eps_b, eps_b]`.
    pub reward_perturb: Option<(f64, u64)>,
}

impl TabularBuilder {
    pub fn uniform_layers(states: usize, actions: usize, horizon: usize) -> Self {
        Self {
            layers: vec![LayerSpec { states, actions }; horizon],
            transitions: Vec::new(),
            rewards: Vec::new(),
            noise: RewardNoise::Bernoulli,
            init_states: (0..states).collect(),
            reward_perturb: None,
        }
    }

    pub fn build(self) -> Result<TabularEnv> {
        let horizon = self.layers.len();
        if horizon == 0 {
            return Err(Error::InvalidEnv("horizon must be at least 1".into()));
        }
        for (h, layer) in self.layers.iter().enumerate() {
            if layer.states == 0 || layer.actions == 0 {
                return Err(Error::InvalidEnv(format!(
                    "layer {} must have at least one state and one action",
                    h + 1
                )));
            }
        }
        let shape_ok = |table: &Vec<Vec<Vec<f64>>>| {
            table.len() == horizon
                && table.iter().zip(&self.layers).all(|(layer_tab, spec)| {
                    layer_tab.len() == spec.states
                        && layer_tab.iter().all(|row| row.len() == spec.actions)
                })
        };
        if !shape_ok(&self.rewards) {
            return Err(Error::InvalidEnv("reward table shape mismatch".into()));
        }
        for layer_tab in &self.rewards {
            for row in layer_tab {
                for &r in row {
                    if !(0.0..=1.0).contains(&r) {
                        return Err(Error::InvalidEnv(format!(
                            "mean reward {r} outside the required [0,1] bound"
                        )));
                    }
                }
            }
        }
        for (h, layer_tab) in self.transitions.iter().enumerate() {
            if layer_tab.len() != self.layers[h].states {
                return Err(Error::InvalidEnv("transition table shape mismatch".into()));
            }
            let next_states = if h + 1 < horizon {
                self.layers[h + 1].states
            } else {
                1
            };
            for row in layer_tab {
                if row.len() != self.layers[h].actions {
                    return Err(Error::InvalidEnv("transition table shape mismatch".into()));
                }
                if h + 1 < horizon {
                    for &ns in row {
                        if ns >= next_states {
                            return Err(Error::InvalidEnv(format!(
                                "transition target {ns} out of range for layer {}",
                                h + 2
                            )));
                        }
                    }
                }
            }
        }
        for &s in &self.init_states {
            if s >= self.layers[0].states {
                return Err(Error::InvalidEnv(format!(
                    "initial state {s} out of range"
                )));
            }
        }
        if self.init_states.is_empty() {
            return Err(Error::InvalidEnv("no initial states".into()));
        }

        let base_rewards = self.rewards.clone();
        let mut mean_rewards = self.rewards;
        let mut eps_b = 0.0;
        if let Some((magnitude, seed)) = self.reward_perturb {
            eps_b = magnitude;
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            for layer_tab in mean_rewards.iter_mut() {
                for row in layer_tab.iter_mut() {
                    for r in row.iter_mut() {
                        let delta = (rng.random::<f64>() * 2.0 - 1.0) * magnitude;
                        *r = (*r + delta).clamp(0.0, 1.0);
                    }
                }
            }
        }

        let mut offsets = Vec::with_capacity(horizon);
        let mut dim = 0;
        for layer in &self.layers {
            offsets.push(dim);
            dim += layer.states * layer.actions;
        }

        // Dynamic program over the actual mean rewards.
        let mut v_star = vec![Vec::new(); horizon];
        let mut pi_star = vec![Vec::new(); horizon];
        for h in (0..horizon).rev() {
            let layer = self.layers[h];
            let mut values = vec![0.0; layer.states];
            let mut actions = vec![0usize; layer.states];
            for s in 0..layer.states {
                let mut best = f64::NEG_INFINITY;
                let mut best_a = 0;
                for a in 0..layer.actions {
                    let future = if h + 1 < horizon {
                        v_star[h + 1][self.transitions[h][s][a]]
                    } else {
                        0.0
                    };
                    let q = mean_rewards[h][s][a] + future;
                    if q > best {
                        best = q;
                        best_a = a;
                    }
                }
                values[s] = best;
                actions[s] = best_a;
            }
            v_star[h] = values;
            pi_star[h] = actions;
        }

        Ok(TabularEnv {
            layers: self.layers,
            dim,
            offsets,
            transitions: self.transitions,
            mean_rewards,
            base_rewards,
            noise: self.noise,
            init_states: self.init_states,
            eps_b,
            v_star,
            pi_star,
        })
    }
}

impl TabularEnv {
    /// Layered MDP with uniform layer sizes, random deterministic transitions
    /// and random mean rewards in [0, 1].
    pub fn random(
        states_per_layer: usize,
        actions: usize,
        horizon: usize,
        seed: u64,
    ) -> Result<Self> {
        Self::random_with_noise(states_per_layer, actions, horizon, seed, RewardNoise::Bernoulli)
    }

    pub fn random_with_noise(
        states_per_layer: usize,
        actions: usize,
        horizon: usize,
        seed: u64,
        noise: RewardNoise,
    ) -> Result<Self> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut builder = TabularBuilder::uniform_layers(states_per_layer, actions, horizon);
        builder.noise = noise;
        builder.transitions = (0..horizon)
            .map(|_| {
                (0..states_per_layer)
                    .map(|_| {
                        (0..actions)
                            .map(|_| rng.random_range(0..states_per_layer))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        builder.rewards = (0..horizon)
            .map(|_| {
                (0..states_per_layer)
                    .map(|_| (0..actions).map(|_| rng.random::<f64>()).collect())
                    .collect()
            })
            .collect();
        builder.build()
    }

    /// Single chain of states with one action per layer.
    pub fn single_path(horizon: usize, seed: u64) -> Result<Self> {
        Self::random(1, 1, horizon, seed)
    }

    /// The two-layer MDP where every first-layer state feeds a single second
    /// layer state that pays reward 1; the backed-up parameter is the all-ones
    /// vector over the first layer.
    pub fn second_layer_payoff(first_layer_states: usize) -> Result<Self> {
        let mut builder = TabularBuilder {
            layers: vec![
                LayerSpec {
                    states: first_layer_states,
                    actions: 1,
                },
                LayerSpec {
                    states: 1,
                    actions: 1,
                },
            ],
            transitions: vec![vec![vec![0]; first_layer_states], vec![vec![0]; 1]],
            rewards: vec![vec![vec![0.0]; first_layer_states], vec![vec![1.0]; 1]],
            noise: RewardNoise::Deterministic,
            init_states: (0..first_layer_states).collect(),
            reward_perturb: None,
        };
        builder.noise = RewardNoise::Deterministic;
        builder.build()
    }

    /// Two-action bandit chain where the rewarding branch starts out of the
    /// span of anything a greedy learner visits: greedy locks onto action 0
    /// (worth 0.9 total) while action 1 is worth 1.0.
    pub fn exploration_fixture(noise: RewardNoise) -> Result<Self> {
        TabularBuilder {
            layers: vec![
                LayerSpec {
                    states: 1,
                    actions: 2,
                },
                LayerSpec {
                    states: 2,
                    actions: 1,
                },
            ],
            transitions: vec![vec![vec![0, 1]], vec![vec![0], vec![0]]],
            rewards: vec![vec![vec![0.6, 0.1]], vec![vec![0.3], vec![0.9]]],
            noise,
            init_states: vec![0],
            reward_perturb: None,
        }
        .build()
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn feature_index(&self, h: usize, state: usize, action: usize) -> usize {
        let layer = self.layers[h - 1];
        self.offsets[h - 1] + state * layer.actions + action
    }

    pub fn num_actions(&self, h: usize) -> usize {
        self.layers[h - 1].actions
    }

    /// Exact optimal action table (for tests).
    pub fn optimal_action(&self, h: usize, state: usize) -> usize {
        self.pi_star[h - 1][state]
    }

    pub fn optimal_value_at(&self, h: usize, state: usize) -> f64 {
        self.v_star[h - 1][state]
    }
}

impl Environment for TabularEnv {
    type State = usize;
    type Action = usize;

    fn dim(&self) -> usize {
        self.dim
    }

    fn horizon(&self) -> usize {
        self.layers.len()
    }

    fn eps_b(&self) -> f64 {
        self.eps_b
    }

    fn feature(&self, h: usize, state: &usize, action: &usize) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim);
        v[self.feature_index(h, *state, *action)] = 1.0;
        v
    }

    fn sample_initial_state(&self, rng: &mut dyn RngCore) -> usize {
        self.init_states[(&mut *rng).random_range(0..self.init_states.len())]
    }

    fn next_state(&self, h: usize, state: &usize, action: &usize) -> usize {
        if h >= self.horizon() {
            return 0;
        }
        self.transitions[h - 1][*state][*action]
    }

    fn mean_reward(&self, h: usize, state: &usize, action: &usize) -> f64 {
        self.mean_rewards[h - 1][*state][*action]
    }

    fn sample_reward(
        &self,
        h: usize,
        state: &usize,
        action: &usize,
        rng: &mut dyn RngCore,
    ) -> f64 {
        self.noise.sample(self.mean_reward(h, state, action), rng)
    }

    fn greedy_action(&self, h: usize, state: &usize, param: &DVector<f64>) -> usize {
        let layer = self.layers[h - 1];
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for a in 0..layer.actions {
            let val = param[self.feature_index(h, *state, a)];
            if val > best_val {
                best_val = val;
                best = a;
            }
        }
        best
    }

    fn random_action(&self, h: usize, _state: &usize, rng: &mut dyn RngCore) -> usize {
        (&mut *rng).random_range(0..self.layers[h - 1].actions)
    }

    fn design_features(&self) -> Vec<DVector<f64>> {
        (0..self.dim)
            .map(|i| DVector::from_fn(self.dim, |j, _| if i == j { 1.0 } else { 0.0 }))
            .collect()
    }

    fn lin_opt(&self, param: &DVector<f64>) -> DVector<f64> {
        let mut best = 0;
        for i in 1..self.dim {
            if param[i] > param[best] {
                best = i;
            }
        }
        DVector::from_fn(self.dim, |j, _| if j == best { 1.0 } else { 0.0 })
    }

    fn lin_opt_radius(&self) -> Option<f64> {
        // Every basis vector is itself a feature.
        Some(1.0)
    }

    fn gamma(&self) -> f64 {
        // One-hot features: Gram eigenvalues are integer counts.
        1.0
    }

    fn optimal_value(&self, state: &usize) -> f64 {
        self.v_star[0][*state]
    }

    fn reward_param(&self, h: usize) -> DVector<f64> {
        let mut omega = DVector::zeros(self.dim);
        let layer = self.layers[h - 1];
        for s in 0..layer.states {
            for a in 0..layer.actions {
                omega[self.feature_index(h, s, a)] = self.base_rewards[h - 1][s][a];
            }
        }
        omega
    }

    fn backup(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        if theta.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: theta.len(),
            });
        }
        let mut out = DVector::zeros(self.dim);
        for h in 1..self.horizon() {
            let layer = self.layers[h - 1];
            let next_layer = self.layers[h];
            for s in 0..layer.states {
                for a in 0..layer.actions {
                    let ns = self.transitions[h - 1][s][a];
                    let mut best = f64::NEG_INFINITY;
                    for na in 0..next_layer.actions {
                        best = best.max(theta[self.feature_index(h + 1, ns, na)]);
                    }
                    out[self.feature_index(h, s, a)] = best;
                }
            }
        }
        // Last layer transitions to the zero-feature terminal state.
        Ok(out)
    }

    fn probe_pairs(
        &self,
        _rng: &mut dyn RngCore,
        max_pairs: usize,
    ) -> Vec<(usize, usize, usize)> {
        let mut pairs = Vec::new();
        'outer: for h in 1..=self.horizon() {
            let layer = self.layers[h - 1];
            for s in 0..layer.states {
                for a in 0..layer.actions {
                    pairs.push((h, s, a));
                    if pairs.len() >= max_pairs {
                        break 'outer;
                    }
                }
            }
        }
        pairs
    }
}

pub(super) fn from_kv(kv: &KvFile) -> Result<TabularEnv> {
    let horizon: usize = kv.require("horizon")?;
    let layers: Vec<LayerSpec> = match kv.raw("layers") {
        Some(spec) => spec
            .split(',')
            .map(|tok| {
                let (s, a) = tok.trim().split_once('x').ok_or_else(|| Error::ConfigParse {
                    line: 0,
                    field: "layers".into(),
                    message: format!("expected `<states>x<actions>`, got `{tok}`"),
                })?;
                Ok(LayerSpec {
                    states: s.parse().map_err(|_| Error::ConfigParse {
                        line: 0,
                        field: "layers".into(),
                        message: format!("bad state count `{s}`"),
                    })?,
                    actions: a.parse().map_err(|_| Error::ConfigParse {
                        line: 0,
                        field: "layers".into(),
                        message: format!("bad action count `{a}`"),
                    })?,
                })
            })
            .collect::<Result<_>>()?,
        None => {
            let states: usize = kv.require("states_per_layer")?;
            let actions: usize = kv.require("actions")?;
            vec![LayerSpec { states, actions }; horizon]
        }
    };
    if layers.len() != horizon {
        return Err(Error::InvalidEnv(format!(
            "layers list has {} entries but horizon is {horizon}",
            layers.len()
        )));
    }

    let seed: u64 = kv.get("seed")?.unwrap_or(0);
    let noise = match kv.raw("reward_noise").unwrap_or("bernoulli") {
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

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let transitions = match kv.get_list::<usize>("transitions")? {
        Some(flat) => unflatten(&layers, &flat, "transitions")?,
        None => layers
            .iter()
            .enumerate()
            .map(|(h, layer)| {
                let next_states = if h + 1 < horizon {
                    layers[h + 1].states
                } else {
                    1
                };
                (0..layer.states)
                    .map(|_| {
                        (0..layer.actions)
                            .map(|_| rng.random_range(0..next_states))
                            .collect()
                    })
                    .collect()
            })
            .collect(),
    };
    let rewards = match kv.get_list::<f64>("rewards")? {
        Some(flat) => unflatten(&layers, &flat, "rewards")?,
        None => layers
            .iter()
            .map(|layer| {
                (0..layer.states)
                    .map(|_| (0..layer.actions).map(|_| rng.random::<f64>()).collect())
                    .collect()
            })
            .collect(),
    };
    let init_states = kv
        .get_list::<usize>("init_states")?
        .unwrap_or_else(|| (0..layers[0].states).collect());
    let reward_perturb = match kv.get::<f64>("reward_perturb")? {
        Some(mag) => Some((mag, kv.get("perturb_seed")?.unwrap_or(seed ^ 0x9e3779b9))),
        None => None,
    };

    TabularBuilder {
        layers,
        transitions,
        rewards,
        noise,
        init_states,
        reward_perturb,
    }
    .build()
}

fn unflatten<T: Copy>(
    layers: &[LayerSpec],
    flat: &[T],
    field: &str,
) -> Result<Vec<Vec<Vec<T>>>> {
    let expected: usize = layers.iter().map(|l| l.states * l.actions).sum();
    if flat.len() != expected {
        return Err(Error::ConfigParse {
            line: 0,
            field: field.into(),
            message: format!("expected {expected} entries, got {}", flat.len()),
        });
    }
    let mut out = Vec::with_capacity(layers.len());
    let mut cursor = 0;
    for layer in layers {
        let mut layer_tab = Vec::with_capacity(layer.states);
        for _ in 0..layer.states {
            layer_tab.push(flat[cursor..cursor + layer.actions].to_vec());
            cursor += layer.actions;
        }
        out.push(layer_tab);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::verify_lbc;
    use approx::assert_relative_eq;

    #[test]
    fn second_layer_payoff_matches_hand_computation() {
        let s = 4;
        let env = TabularEnv::second_layer_payoff(s).unwrap();
        assert_eq!(env.dim(), s + 1);
        for i in 0..s {
            assert_relative_eq!(env.optimal_value(&i), 1.0);
        }
        // Backing up the second-layer indicator yields the all-ones vector
        // over the first layer, an l2 amplification of sqrt(S).
        let mut theta2 = DVector::zeros(s + 1);
        theta2[s] = 1.0;
        let theta1 = env.backup(&theta2).unwrap();
        for i in 0..s {
            assert_relative_eq!(theta1[i], 1.0);
        }
        assert_relative_eq!(theta1[s], 0.0);
        assert_relative_eq!(theta1.norm() / theta2.norm(), (s as f64).sqrt());
    }

    #[test]
    fn single_path_value_is_sum_of_mean_rewards() {
        let env = TabularEnv::single_path(5, 3).unwrap();
        let total: f64 = (1..=5).map(|h| env.mean_reward(h, &0, &0)).sum();
        assert_relative_eq!(env.optimal_value(&0), total, epsilon = 1e-12);
    }

    #[test]
    fn dp_matches_brute_force_enumeration() {
        let env = TabularEnv::random(3, 2, 4, 7).unwrap();
        // Independent oracle: enumerate every action sequence.
        for s0 in 0..3usize {
            let mut best = f64::NEG_INFINITY;
            let horizon = env.horizon();
            let num_seqs = 2usize.pow(horizon as u32);
            for code in 0..num_seqs {
                let mut s = s0;
                let mut total = 0.0;
                for h in 1..=horizon {
                    let a = (code >> (h - 1)) & 1;
                    total += env.mean_reward(h, &s, &a);
                    s = env.next_state(h, &s, &a);
                }
                best = best.max(total);
            }
            assert_relative_eq!(env.optimal_value(&s0), best, epsilon = 1e-12);
        }
    }

    #[test]
    fn bellman_recursion_holds_at_every_reachable_state() {
        let env = TabularEnv::random(4, 3, 3, 11).unwrap();
        for h in 1..=3usize {
            for s in 0..4usize {
                let mut best = f64::NEG_INFINITY;
                for a in 0..3usize {
                    let future = if h < 3 {
                        env.optimal_value_at(h + 1, env.next_state(h, &s, &a))
                    } else {
                        0.0
                    };
                    best = best.max(env.mean_reward(h, &s, &a) + future);
                }
                assert_relative_eq!(env.optimal_value_at(h, s), best, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn exact_lbc_for_one_hot_features() {
        let env = TabularEnv::random(3, 2, 3, 5).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let report = verify_lbc(&env, 20, &mut rng).unwrap();
        assert!(report.max_violation() <= 1e-9, "{report}");
        assert!(report.is_lbc);
    }

    #[test]
    fn perturbed_rewards_violate_within_eps_b() {
        let mut builder = TabularBuilder::uniform_layers(3, 2, 2);
        let env0 = TabularEnv::random(3, 2, 2, 21).unwrap();
        builder.transitions = env0.transitions.clone();
        builder.rewards = env0.base_rewards.clone();
        builder.reward_perturb = Some((0.05, 99));
        let env = builder.build().unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let report = verify_lbc(&env, 10, &mut rng).unwrap();
        assert!(report.max_reward_residual <= 0.05 + 1e-7, "{report}");
        assert!(report.max_reward_residual > 0.0);
        assert!(report.is_lbc);
    }

    #[test]
    fn rewards_outside_unit_interval_are_rejected() {
        let mut builder = TabularBuilder::uniform_layers(1, 1, 1);
        builder.transitions = vec![vec![vec![0]]];
        builder.rewards = vec![vec![vec![1.7]]];
        match builder.build() {
            Err(Error::InvalidEnv(msg)) => assert!(msg.contains("[0,1]"), "{msg}"),
            other => panic!("expected validation failure, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn deterministic_transitions() {
        let env = TabularEnv::random(4, 2, 3, 17).unwrap();
        for h in 1..=2usize {
            for s in 0..4usize {
                for a in 0..2usize {
                    assert_eq!(env.next_state(h, &s, &a), env.next_state(h, &s, &a));
                }
            }
        }
    }

    #[test]
    fn reward_sampling_matches_noise_model() {
        let env = TabularEnv::random(2, 2, 2, 23).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(40);
        let mean = env.mean_reward(1, &0, &0);
        let n = 100_000;
        let sum: f64 = (0..n)
            .map(|_| env.sample_reward(1, &0, &0, &mut rng))
            .sum();
        let empirical = sum / n as f64;
        // 3-sigma Bernoulli bound at n = 1e5 is under 0.005; allow 0.01.
        assert!((empirical - mean).abs() < 0.01);

        let mut det = TabularBuilder::uniform_layers(1, 1, 1);
        det.transitions = vec![vec![vec![0]]];
        det.rewards = vec![vec![vec![0.3]]];
        det.noise = RewardNoise::Deterministic;
        let det_env = det.build().unwrap();
        assert_eq!(det_env.sample_reward(1, &0, &0, &mut rng), 0.3);

        let mut sure = TabularBuilder::uniform_layers(1, 1, 1);
        sure.transitions = vec![vec![vec![0]]];
        sure.rewards = vec![vec![vec![1.0]]];
        let sure_env = sure.build().unwrap();
        for _ in 0..100 {
            assert_eq!(sure_env.sample_reward(1, &0, &0, &mut rng), 1.0);
        }
    }

    #[test]
    fn one_hot_gram_eigenvalues_are_zero_or_at_least_one() {
        // Assumption-4 style check with gamma = 1: sums of distinct one-hot
        // outer products have eigenvalues in {0} union [1, inf).
        let env = TabularEnv::random(2, 2, 2, 31).unwrap();
        let feats = env.design_features();
        let d = env.dim();
        for mask in 1u32..(1 << d.min(8)) {
            let mut gram = nalgebra::DMatrix::zeros(d, d);
            for (i, f) in feats.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    gram.ger(1.0, f, f, 1.0);
                }
            }
            for eig in gram.symmetric_eigenvalues().iter() {
                assert!(*eig < 1e-12 || *eig >= 1.0 - 1e-12);
            }
        }
    }

    #[test]
    fn parses_explicit_spec_file() {
        let text = "kind = tabular\nhorizon = 2\nlayers = 1x2,2x1\n\
                    transitions = 0,1,0,0\nrewards = 0.6,0.1,0.3,0.9\n\
                    reward_noise = none\ninit_states = 0\n";
        let env = match crate::envs::parse_env_spec(text).unwrap() {
            crate::envs::ParsedEnv::Tabular(env) => env,
            _ => panic!("wrong kind"),
        };
        assert_eq!(env.dim(), 4);
        assert_relative_eq!(env.optimal_value(&0), 1.0);
        assert_eq!(env.optimal_action(1, 0), 1);
    }
}
