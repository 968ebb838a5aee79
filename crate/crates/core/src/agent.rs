//! Null-space randomized value iteration: backward per-horizon regression,
//! Gaussian perturbation confined to the orthogonal complement of the data
//! span, greedy rollout, and covariance bookkeeping.

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha12Rng;
use std::time::Instant;

use crate::design::DesignMeasure;
use crate::envs::{standard_normal, Environment};
use crate::error::{Error, Result};
use crate::feasibility::WalkConfig;
use crate::linalg::{self, SpanTracker};
use crate::oracles::{
    solve_reward_regression, solve_value_regression, LinOpt, OracleMode, RegressionOutcome,
    RegressionProblem,
};

/// Inputs to the exact noise-schedule recursion.
#[derive(Debug, Clone, Copy)]
pub struct ScheduleInputs {
    pub dim: usize,
    pub horizon: usize,
    /// Support size of the D-optimal design.
    pub design_size: usize,
    pub gamma: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub eps_b: f64,
    pub rounds: usize,
}

/// Noise scales and constraint widths for every horizon level. Indexing is
/// 1-based through the accessors; `scale_override` multiplies the sigma
/// values at sampling time only.
#[derive(Debug, Clone)]
pub struct NoiseSchedule {
    pub sigma_r: f64,
    sigma_h: Vec<f64>,
    w_h: Vec<f64>,
    pub w0: f64,
    pub b_p_err: f64,
    pub b_r_err: f64,
    pub b_r_noise: f64,
    b_p_noise: Vec<f64>,
    pub scale_override: f64,
    pub inputs: ScheduleInputs,
}

impl NoiseSchedule {
    pub fn sigma(&self, h: usize) -> f64 {
        self.sigma_h[h - 1]
    }

    pub fn width(&self, h: usize) -> f64 {
        self.w_h[h - 1]
    }

    pub fn noise_envelope(&self, h: usize) -> f64 {
        self.b_p_noise[h - 1]
    }

    pub fn with_override(mut self, scale: f64) -> Self {
        self.scale_override = scale;
        self
    }

    /// Slack appearing in the optimism event; zero for exact oracles on
    /// environments without inherent Bellman error.
    pub fn optimism_slack(&self) -> f64 {
        self.b_p_err * self.inputs.gamma * self.inputs.horizon as f64
    }
}

/// Exact parameter recursion: `W` anchored at 1 beyond the last level, each
/// step adding the scaled noise envelopes, with
/// `sigma_h = sqrt(H) (sqrt(3) gamma B_err^P + sqrt(8 m) (W_h + eps2))`.
pub fn compute_schedule(inputs: ScheduleInputs) -> Result<NoiseSchedule> {
    let d = inputs.dim as f64;
    let horizon = inputs.horizon;
    let h_f = horizon as f64;
    let m = inputs.design_size as f64;
    let t = inputs.rounds.max(1) as f64;
    let e2 = std::f64::consts::E * std::f64::consts::E;

    let b_p_err = (2.0 * inputs.eps1.powi(2) + 4.0 * t * inputs.eps_b.powi(2)).sqrt();
    let one_eps2 = 1.0 + inputs.eps2;
    let b_r_err = (1030.0
        * one_eps2.powi(4)
        * d
        * (24.0 * one_eps2 * e2 * t.powi(3) * h_f * h_f).ln()
        + 4.0 * inputs.eps1.powi(2)
        + 16.0 * one_eps2 * (1.0 + inputs.eps_b * t))
        .sqrt();
    let sigma_r = h_f.sqrt() * b_r_err;
    let b_r_noise = sigma_r * (2.0 * d * (6.0 * d * h_f * t * t).ln()).sqrt();

    let mut sigma_h = vec![0.0; horizon];
    let mut b_p_noise = vec![0.0; horizon];
    let mut w_h = vec![0.0; horizon];
    let mut w = 1.0;
    for h in (1..=horizon).rev() {
        w_h[h - 1] = w;
        let sigma = h_f.sqrt()
            * (3.0_f64.sqrt() * inputs.gamma * b_p_err + (8.0 * m).sqrt() * (w + inputs.eps2));
        let envelope = sigma * (2.0 * d * (6.0 * d * h_f * h_f * t * t).ln()).sqrt();
        sigma_h[h - 1] = sigma;
        b_p_noise[h - 1] = envelope;
        w = w + 2.0 * inputs.eps2 + (2.0 * d).sqrt() * envelope + (2.0 * d).sqrt() * b_r_noise + 1.0;
        if !w.is_finite() {
            return Err(Error::ScheduleOverflow { horizon: h });
        }
    }

    Ok(NoiseSchedule {
        sigma_r,
        sigma_h,
        w_h,
        w0: w,
        b_p_err,
        b_r_err,
        b_r_noise,
        b_p_noise,
        scale_override: 1.0,
        inputs,
    })
}

/// Leading-order closed form of `sigma_h` with all error terms and log
/// factors dropped: `(d sqrt(mH))^{H-h+1} (sqrt(d) + sqrt(mH))`.
pub fn sigma_order_of_magnitude(dim: usize, h: usize, horizon: usize, design_size: usize) -> f64 {
    let d = dim as f64;
    let mh = design_size as f64 * horizon as f64;
    (d * mh.sqrt()).powi((horizon - h + 1) as i32) * (d.sqrt() + mh.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentConfig {
    pub oracle: OracleMode,
    pub known_reward: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            oracle: OracleMode::Exact,
            known_reward: false,
        }
    }
}

/// Named RNG streams; each consumer owns its stream so draw counts in one
/// component never shift another's.
pub struct AgentRngs {
    pub noise: ChaCha12Rng,
    pub reward: ChaCha12Rng,
    pub init: ChaCha12Rng,
    pub walk: ChaCha12Rng,
}

/// One round's record.
#[derive(Debug, Clone)]
pub struct EpisodeLog<S, A> {
    pub round: usize,
    pub initial_state: S,
    pub trajectory: Vec<(S, A, f64)>,
    /// Whether the whole trajectory stayed in the span of historical data.
    pub span_event: bool,
    pub v_star: f64,
    pub policy_value: f64,
    pub regret_inst: f64,
    pub value_estimate: f64,
    pub optimism: bool,
    pub residual_max: f64,
    /// Per-level `||phi||^2` in the inverse running covariance.
    pub leverage: Vec<f64>,
    /// Per-level `||xi^P||` in the decomposed-design norm.
    pub noise_norms: Vec<f64>,
    /// Per-level `||P xi^P||_2`, the null-space confinement check.
    pub span_leak: Vec<f64>,
    pub fallbacks: usize,
    pub wall_micros: u64,
}

/// Per-level snapshot taken while planning.
#[derive(Debug, Clone)]
pub struct HorizonSnapshot {
    pub theta_hat: DVector<f64>,
    pub theta_bar: DVector<f64>,
    pub omega_hat: DVector<f64>,
    pub omega_bar: DVector<f64>,
    pub residual: f64,
    pub xi_p_lambda_norm: f64,
    pub span_leak: f64,
}

pub struct Plan {
    /// `params[h]` is the greedy parameter at level h (1-based; index 0 unused).
    pub params: Vec<DVector<f64>>,
    pub snapshots: Vec<HorizonSnapshot>,
    pub residual_max: f64,
    pub fallbacks: usize,
}

struct RoundData<S> {
    rewards: Vec<f64>,
    features: Vec<DVector<f64>>,
    next_states: Vec<S>,
}

struct LevelCache {
    lambda: DMatrix<f64>,
    lambda_inv_sqrt: DMatrix<f64>,
}

struct EnvLinOpt<'a, E: Environment>(&'a E);

impl<E: Environment> LinOpt for EnvLinOpt<'_, E> {
    fn argmax(&self, param: &DVector<f64>) -> DVector<f64> {
        self.0.lin_opt(param)
    }

    fn radius(&self) -> Option<f64> {
        self.0.lin_opt_radius()
    }
}

pub struct Agent<'a, E: Environment> {
    env: &'a E,
    schedule: &'a NoiseSchedule,
    config: AgentConfig,
    walk: WalkConfig,
    lambda_design: DMatrix<f64>,
    trackers: Vec<SpanTracker>,
    sigma_mats: Vec<DMatrix<f64>>,
    sigma_inv: Vec<DMatrix<f64>>,
    /// Data-only Gram matrices per level.
    data_grams: Vec<DMatrix<f64>>,
    caches: Vec<LevelCache>,
    history: Vec<RoundData<E::State>>,
    span_failures: usize,
    round: usize,
}

impl<'a, E: Environment> Agent<'a, E> {
    pub fn new(
        env: &'a E,
        design: &DesignMeasure,
        schedule: &'a NoiseSchedule,
        config: AgentConfig,
        walk: WalkConfig,
    ) -> Result<Self> {
        let dim = env.dim();
        let horizon = env.horizon();
        if design.dim != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: design.dim,
            });
        }
        let lambda_design = design.lambda();
        let mut agent = Self {
            env,
            schedule,
            config,
            walk,
            lambda_design,
            trackers: (0..horizon).map(|_| SpanTracker::new(dim)).collect(),
            sigma_mats: Vec::new(),
            sigma_inv: Vec::new(),
            data_grams: (0..horizon).map(|_| DMatrix::zeros(dim, dim)).collect(),
            caches: Vec::new(),
            history: Vec::new(),
            span_failures: 0,
            round: 0,
        };
        for h in 1..=horizon {
            let cache = agent.build_cache(h)?;
            agent.caches.push(cache);
            agent.sigma_mats.push(agent.lambda_design.clone());
            agent.sigma_inv.push(linalg::pd_inverse(&agent.lambda_design)?);
        }
        Ok(agent)
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn span_failures(&self) -> usize {
        self.span_failures
    }

    pub fn projector(&self, h: usize) -> &DMatrix<f64> {
        self.trackers[h - 1].projector()
    }

    pub fn lambda(&self, h: usize) -> &DMatrix<f64> {
        &self.caches[h - 1].lambda
    }

    pub fn sigma_mat(&self, h: usize) -> &DMatrix<f64> {
        &self.sigma_mats[h - 1]
    }

    /// Decomposed-design matrix for the current projector:
    /// `P L P + (I - P) L (I - P)`.
    fn build_cache(&self, h: usize) -> Result<LevelCache> {
        let dim = self.env.dim();
        let p = self.trackers[h - 1].projector();
        let eye = DMatrix::identity(dim, dim);
        let q = &eye - p;
        let lambda = p * &self.lambda_design * p + &q * &self.lambda_design * &q;
        let lambda_inv_sqrt = linalg::pd_inv_sqrt(&lambda).map_err(|_| Error::InvariantViolation {
            name: "decomposed design matrix must stay invertible".into(),
            round: self.round + 1,
            horizon: h,
        })?;
        Ok(LevelCache {
            lambda,
            lambda_inv_sqrt,
        })
    }

    /// One constrained squared-loss solve at level `h`. The exact oracle
    /// works on borrowed history features; the approximate oracle (and the
    /// fallback when the min-norm solution breaks the functional bound)
    /// materializes the regression problem for the feasibility reduction.
    fn regress(
        &self,
        h: usize,
        targets: &[f64],
        width: f64,
        is_reward: bool,
        linopt: &dyn LinOpt,
        rngs: &mut AgentRngs,
    ) -> Result<RegressionOutcome> {
        let dim = self.env.dim();
        let features = || self.history.iter().map(|d| &d.features[h - 1]);
        if self.config.oracle == OracleMode::Exact {
            let mut moment = DVector::zeros(dim);
            for (phi, &y) in features().zip(targets) {
                moment.axpy(y, phi, 1.0);
            }
            let theta = linalg::pseudo_inverse(&self.data_grams[h - 1]) * moment;
            if crate::oracles::max_functional(linopt, &theta) <= width + 1e-9 {
                // .abs() canonicalizes the empty sum's negative zero.
                let residual = features()
                    .zip(targets)
                    .map(|(phi, y)| (theta.dot(phi) - y).powi(2))
                    .sum::<f64>()
                    .abs();
                return Ok(RegressionOutcome {
                    theta,
                    residual,
                    fallback: false,
                });
            }
        }
        let mut problem = RegressionProblem::new(dim, width);
        problem.data = features().cloned().zip(targets.iter().cloned()).collect();
        if is_reward {
            solve_reward_regression(&problem, self.config.oracle, linopt, &self.walk, &mut rngs.walk)
        } else {
            solve_value_regression(&problem, self.config.oracle, linopt, &self.walk, &mut rngs.walk)
        }
    }

    /// Backward pass of one round: fit, perturb in the null space, and return
    /// the greedy parameters per level.
    pub fn plan(&mut self, rngs: &mut AgentRngs) -> Result<Plan> {
        let horizon = self.env.horizon();
        let dim = self.env.dim();
        let linopt = EnvLinOpt(self.env);
        let mut params = vec![DVector::zeros(dim); horizon + 2];
        let mut snapshots: Vec<HorizonSnapshot> = (0..horizon)
            .map(|_| HorizonSnapshot {
                theta_hat: DVector::zeros(dim),
                theta_bar: DVector::zeros(dim),
                omega_hat: DVector::zeros(dim),
                omega_bar: DVector::zeros(dim),
                residual: 0.0,
                xi_p_lambda_norm: 0.0,
                span_leak: 0.0,
            })
            .collect();
        let mut residual_max = 0.0_f64;
        let mut fallbacks = 0usize;
        let scale = self.schedule.scale_override;

        for h in (1..=horizon).rev() {
            let cache = &self.caches[h - 1];
            let projector = self.trackers[h - 1].projector().clone();

            // Value regression against the freshly perturbed level above.
            // Targets are recomputed every round; the features stay borrowed
            // from the history.
            let targets: Vec<f64> = self
                .history
                .iter()
                .map(|data| {
                    if h == horizon {
                        0.0
                    } else {
                        self.env
                            .state_value(h + 1, &data.next_states[h - 1], &params[h + 1])
                    }
                })
                .collect();
            let value_out = self
                .regress(h, &targets, self.schedule.width(h), false, &linopt, rngs)
                .map_err(|e| annotate(e, self.round + 1, h))?;
            residual_max = residual_max.max(value_out.residual);
            fallbacks += value_out.fallback as usize;

            let omega_hat;
            let omega_bar;
            if self.config.known_reward {
                omega_hat = self.env.reward_param(h);
                omega_bar = omega_hat.clone();
            } else {
                let rewards: Vec<f64> = self.history.iter().map(|d| d.rewards[h - 1]).collect();
                let reward_out = self
                    .regress(h, &rewards, 1.0, true, &linopt, rngs)
                    .map_err(|e| annotate(e, self.round + 1, h))?;
                fallbacks += reward_out.fallback as usize;
                omega_hat = reward_out.theta;
                // Reward noise over the full running covariance.
                let gauss = DVector::from_fn(dim, |_, _| standard_normal(&mut rngs.noise));
                let xi_r = sample_inv_cov(&self.sigma_mats[h - 1], &gauss)?
                    * (self.schedule.sigma_r * scale);
                omega_bar = &omega_hat + xi_r;
            }

            // Null-space perturbation: draw with covariance sigma^2 Lambda^{-1},
            // then project out the span component. The second projection pass
            // keeps the confinement exact even when the draw is huge.
            let gauss = DVector::from_fn(dim, |_, _| standard_normal(&mut rngs.noise));
            let zeta = (self.schedule.sigma(h) * scale) * (&cache.lambda_inv_sqrt * gauss);
            let mut xi_p = &zeta - &projector * &zeta;
            xi_p -= &projector * &xi_p;
            let theta_bar = &value_out.theta + &xi_p;

            let snapshot = &mut snapshots[h - 1];
            snapshot.theta_hat = value_out.theta;
            snapshot.theta_bar = theta_bar.clone();
            snapshot.omega_hat = omega_hat;
            snapshot.omega_bar = omega_bar.clone();
            snapshot.residual = value_out.residual;
            snapshot.xi_p_lambda_norm = linalg::quad_norm(&xi_p, &cache.lambda)?;
            snapshot.span_leak = (&projector * &xi_p).norm();

            params[h] = omega_bar + theta_bar;
        }

        Ok(Plan {
            params,
            snapshots,
            residual_max,
            fallbacks,
        })
    }

    /// Greedy rollout of a plan; records the episode and folds the trajectory
    /// into the running state.
    pub fn rollout(&mut self, plan: &Plan, rngs: &mut AgentRngs) -> Result<EpisodeLog<E::State, E::Action>> {
        let start = Instant::now();
        let horizon = self.env.horizon();
        let t = self.round + 1;

        let initial = self.env.sample_initial_state(&mut rngs.init);
        let mut state = initial.clone();
        let mut rewards = Vec::with_capacity(horizon);
        let mut features = Vec::with_capacity(horizon);
        let mut next_states = Vec::with_capacity(horizon);
        let mut trajectory = Vec::with_capacity(horizon);
        let mut leverage = Vec::with_capacity(horizon);
        let mut span_event = true;
        let mut mean_sum = 0.0;

        for h in 1..=horizon {
            self.env
                .validate_state(h, &state)
                .map_err(|e| annotate(e, t, h))?;
            let action = self.env.greedy_action(h, &state, &plan.params[h]);
            let phi = self.env.feature(h, &state, &action);
            leverage.push(linalg::quad_norm(&phi, &self.sigma_inv[h - 1])?.powi(2));
            if !self.trackers[h - 1].contains(&phi) {
                span_event = false;
            }
            let reward = self.env.sample_reward(h, &state, &action, &mut rngs.reward);
            mean_sum += self.env.mean_reward(h, &state, &action);
            let next = self.env.next_state(h, &state, &action);
            trajectory.push((state.clone(), action, reward));
            rewards.push(reward);
            features.push(phi);
            next_states.push(next.clone());
            state = next;
        }

        let v_star = self.env.optimal_value(&initial);
        let value_estimate = self.env.state_value(1, &initial, &plan.params[1]);
        let slack = self.schedule.optimism_slack();
        let log = EpisodeLog {
            round: t,
            initial_state: initial,
            trajectory,
            span_event,
            v_star,
            policy_value: mean_sum,
            regret_inst: v_star - mean_sum,
            value_estimate,
            optimism: v_star <= value_estimate + slack + 1e-9,
            residual_max: plan.residual_max,
            leverage,
            noise_norms: plan.snapshots.iter().map(|s| s.xi_p_lambda_norm).collect(),
            span_leak: plan.snapshots.iter().map(|s| s.span_leak).collect(),
            fallbacks: plan.fallbacks,
            wall_micros: start.elapsed().as_micros() as u64,
        };

        self.ingest(RoundData {
            rewards,
            features,
            next_states,
        })?;
        if !log.span_event {
            self.span_failures += 1;
            let budget = self.env.dim() * horizon;
            if self.span_failures > budget {
                return Err(Error::InvariantViolation {
                    name: format!(
                        "span-event failures exceeded the d*H budget ({budget}); rank tolerance is suspect"
                    ),
                    round: t,
                    horizon: 0,
                });
            }
        }
        Ok(log)
    }

    /// Feeds one scripted round into the running state without planning;
    /// used by tests that pin a specific history.
    pub fn ingest_trajectory(
        &mut self,
        states: Vec<E::State>,
        actions: Vec<E::Action>,
        rewards: Vec<f64>,
    ) -> Result<()> {
        let horizon = self.env.horizon();
        if states.len() != horizon || actions.len() != horizon || rewards.len() != horizon {
            return Err(Error::DimensionMismatch {
                expected: horizon,
                got: states.len(),
            });
        }
        let mut features = Vec::with_capacity(horizon);
        let mut next_states = Vec::with_capacity(horizon);
        for h in 1..=horizon {
            features.push(self.env.feature(h, &states[h - 1], &actions[h - 1]));
            next_states.push(self.env.next_state(h, &states[h - 1], &actions[h - 1]));
        }
        self.ingest(RoundData {
            rewards,
            features,
            next_states,
        })
    }

    fn ingest(&mut self, data: RoundData<E::State>) -> Result<()> {
        let horizon = self.env.horizon();
        for h in 1..=horizon {
            let phi = &data.features[h - 1];
            let sigma = &mut self.sigma_mats[h - 1];
            sigma.ger(1.0, phi, phi, 1.0);
            self.data_grams[h - 1].ger(1.0, phi, phi, 1.0);
            self.sigma_inv[h - 1] = linalg::pd_inverse(sigma)?;
            if self.trackers[h - 1].insert(phi)? {
                self.caches[h - 1] = self.build_cache(h)?;
            }
        }
        self.history.push(data);
        self.round += 1;
        Ok(())
    }
}

fn annotate(e: Error, round: usize, horizon: usize) -> Error {
    match e {
        Error::InvariantViolation { name, .. } => Error::InvariantViolation {
            name,
            round,
            horizon,
        },
        Error::OracleFailure(msg) => {
            Error::OracleFailure(format!("round {round}, horizon {horizon}: {msg}"))
        }
        other => other,
    }
}

/// Draws `Sigma^{-1/2} g` through the Cholesky factor of `Sigma`.
fn sample_inv_cov(sigma: &DMatrix<f64>, gauss: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = sigma
        .clone()
        .cholesky()
        .ok_or(Error::SingularDesign { min_eig: f64::NAN })?;
    let lt = chol.l().transpose();
    lt.solve_upper_triangular(gauss)
        .ok_or(Error::SingularDesign { min_eig: f64::NAN })
}

/// Runs the full loop for `rounds` episodes.
pub fn run_experiment<E: Environment>(
    env: &E,
    design: &DesignMeasure,
    schedule: &NoiseSchedule,
    config: AgentConfig,
    walk: WalkConfig,
    rounds: usize,
    rngs: &mut AgentRngs,
) -> Result<Vec<EpisodeLog<E::State, E::Action>>> {
    let mut agent = Agent::new(env, design, schedule, config, walk)?;
    let mut logs = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let plan = agent.plan(rngs)?;
        logs.push(agent.rollout(&plan, rngs)?);
    }
    Ok(logs)
}

/// Uniform-random baseline producing the same log schema.
pub fn run_uniform_baseline<E: Environment>(
    env: &E,
    rounds: usize,
    rngs: &mut AgentRngs,
) -> Result<Vec<EpisodeLog<E::State, E::Action>>> {
    let horizon = env.horizon();
    let mut trackers: Vec<SpanTracker> = (0..horizon).map(|_| SpanTracker::new(env.dim())).collect();
    let mut logs = Vec::with_capacity(rounds);
    for t in 1..=rounds {
        let start = Instant::now();
        let initial = env.sample_initial_state(&mut rngs.init);
        let mut state = initial.clone();
        let mut trajectory = Vec::with_capacity(horizon);
        let mut span_event = true;
        let mut mean_sum = 0.0;
        for h in 1..=horizon {
            let action = env.random_action(h, &state, &mut rngs.noise);
            let phi = env.feature(h, &state, &action);
            if !trackers[h - 1].contains(&phi) {
                span_event = false;
            }
            trackers[h - 1].insert(&phi)?;
            let reward = env.sample_reward(h, &state, &action, &mut rngs.reward);
            mean_sum += env.mean_reward(h, &state, &action);
            let next = env.next_state(h, &state, &action);
            trajectory.push((state.clone(), action, reward));
            state = next;
        }
        let v_star = env.optimal_value(&initial);
        logs.push(EpisodeLog {
            round: t,
            initial_state: initial,
            trajectory,
            span_event,
            v_star,
            policy_value: mean_sum,
            regret_inst: v_star - mean_sum,
            value_estimate: 0.0,
            optimism: false,
            residual_max: 0.0,
            leverage: vec![0.0; horizon],
            noise_norms: vec![0.0; horizon],
            span_leak: vec![0.0; horizon],
            fallbacks: 0,
            wall_micros: start.elapsed().as_micros() as u64,
        });
    }
    Ok(logs)
}
