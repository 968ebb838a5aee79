//! Randomized value iteration for deterministic-dynamics MDPs whose Bellman
//! backups stay linear in a known feature map, with exploration noise
//! injected only in the null space of the observed data.
//!
//! The crate bundles the learner with everything needed to run it end to
//! end: dense linear-algebra kernels, approximate D-optimal designs, a suite
//! of verifiable environments with exact ground-truth oracles, a
//! separation-oracle convex feasibility solver driven by ball walks, the
//! squared-loss minimization oracles built on top of it, and a seeded
//! experiment harness with CSV metrics.

pub mod agent;
pub mod config;
pub mod design;
pub mod envs;
pub mod error;
pub mod feasibility;
pub mod harness;
pub mod linalg;
pub mod oracles;
pub mod rng;

pub use agent::{
    compute_schedule, run_experiment, Agent, AgentConfig, AgentRngs, EpisodeLog, NoiseSchedule,
    ScheduleInputs,
};
pub use design::{design_g_value, frank_wolfe_design, DesignMeasure};
pub use envs::{
    verify_lbc, AnisotropicEnv, Environment, LbcReport, LqrConfig, LqrEnv, ParsedEnv, RewardNoise,
    TabularEnv,
};
pub use error::{Error, Result};
pub use feasibility::{
    ball_walk_sampler, solve_feasibility, ConvexProblem, Feasibility, Separation,
    SeparationOracle, WalkConfig,
};
pub use harness::{cli_design, cli_run, cli_sweep, cli_verify, PolicyKind, RunConfig, RunResult};
pub use oracles::{
    apx_reward_oracle, apx_value_oracle, exact_lsq, separation_for_kapx, FiniteLinOpt, LinOpt,
    OracleMode, RegressionProblem,
};
pub use rng::RngStreams;
