//! Experiment runner: run configuration, seeded execution, CSV metric
//! logging, sweeps across configs, baselines, and the environment
//! verification report.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::agent::{
    compute_schedule, run_experiment, run_uniform_baseline, AgentConfig, EpisodeLog,
    NoiseSchedule, ScheduleInputs,
};
use crate::config::KvFile;
use crate::design::{frank_wolfe_design, design_g_value, DesignMeasure};
use crate::envs::{load_env_spec, verify_lbc, Environment, ParsedEnv};
use crate::error::{Error, Result};
use crate::feasibility::WalkConfig;
use crate::oracles::OracleMode;
use crate::rng::RngStreams;

pub const METRICS_HEADER: &str = "round,regret_inst,regret_cum,span_event,optimism,residual_max,wall_ms";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    Algorithm,
    /// Zero-noise greedy least-squares value iteration.
    Greedy,
    UniformRandom,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub env_spec: PathBuf,
    pub rounds: usize,
    pub seed: u64,
    pub oracle: OracleMode,
    pub eps1: Option<f64>,
    pub eps2: Option<f64>,
    pub scale_override: f64,
    pub known_reward: bool,
    pub policy: PolicyKind,
    pub gamma_override: Option<f64>,
    pub design_eps: f64,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let kv = KvFile::parse(text)?;
        let env_spec_raw: String = kv.require("env_spec")?;
        let env_spec = base_dir.join(env_spec_raw);
        let oracle = match kv.raw("oracle").unwrap_or("exact") {
            "exact" => OracleMode::Exact,
            "approximate" => OracleMode::Approximate {
                eps: kv.get("oracle_eps")?.unwrap_or(1e-3),
                delta: kv.get("oracle_delta")?.unwrap_or(0.05),
            },
            other => {
                return Err(Error::ConfigParse {
                    line: 0,
                    field: "oracle".into(),
                    message: format!("unknown oracle mode `{other}`"),
                })
            }
        };
        let policy = match kv.raw("policy").unwrap_or("algorithm") {
            "algorithm" => PolicyKind::Algorithm,
            "greedy" => PolicyKind::Greedy,
            "uniform" => PolicyKind::UniformRandom,
            other => {
                return Err(Error::ConfigParse {
                    line: 0,
                    field: "policy".into(),
                    message: format!("unknown policy `{other}`"),
                })
            }
        };
        let mut seed: u64 = kv.get("seed")?.unwrap_or(0);
        if let Ok(override_seed) = std::env::var("NSRLSVI_SEED") {
            seed = override_seed.parse().map_err(|_| Error::ConfigParse {
                line: 0,
                field: "NSRLSVI_SEED".into(),
                message: format!("cannot parse `{override_seed}`"),
            })?;
        }
        Ok(Self {
            env_spec,
            rounds: kv.require("rounds")?,
            seed,
            oracle,
            eps1: kv.get("eps1")?,
            eps2: kv.get("eps2")?,
            scale_override: kv.get("scale_override")?.unwrap_or(1.0),
            known_reward: kv.get("known_reward")?.unwrap_or(false),
            policy,
            gamma_override: kv.get("gamma_override")?,
            design_eps: kv.get("design_eps")?.unwrap_or(0.01),
            out_dir: base_dir.join(kv.raw("out_dir").unwrap_or("out")),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }
}

/// Environment-agnostic view of one round.
#[derive(Debug, Clone)]
pub struct RoundMetrics {
    pub round: usize,
    pub regret_inst: f64,
    pub regret_cum: f64,
    pub span_event: bool,
    pub optimism: bool,
    pub residual_max: f64,
    pub wall_ms: u64,
    pub v_star: f64,
    pub value_estimate: f64,
    pub policy_value: f64,
    pub leverage: Vec<f64>,
    pub noise_norms: Vec<f64>,
    pub span_leak: Vec<f64>,
}

pub fn collect_metrics<S, A>(logs: &[EpisodeLog<S, A>]) -> Vec<RoundMetrics> {
    let mut cum = 0.0;
    logs.iter()
        .map(|log| {
            cum += log.regret_inst;
            RoundMetrics {
                round: log.round,
                regret_inst: log.regret_inst,
                regret_cum: cum,
                span_event: log.span_event,
                optimism: log.optimism,
                residual_max: log.residual_max,
                wall_ms: log.wall_micros / 1000,
                v_star: log.v_star,
                value_estimate: log.value_estimate,
                policy_value: log.policy_value,
                leverage: log.leverage.clone(),
                noise_norms: log.noise_norms.clone(),
                span_leak: log.span_leak.clone(),
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub metrics: Vec<RoundMetrics>,
    pub schedule: Option<NoiseSchedule>,
    pub design_size: usize,
    pub dim: usize,
    pub horizon: usize,
    pub span_budget: usize,
    pub span_failures: usize,
}

impl RunResult {
    pub fn final_cum_regret(&self) -> f64 {
        self.metrics.last().map_or(0.0, |m| m.regret_cum)
    }

    pub fn optimism_frequency(&self) -> f64 {
        if self.metrics.is_empty() {
            return 0.0;
        }
        self.metrics.iter().filter(|m| m.optimism).count() as f64 / self.metrics.len() as f64
    }
}

/// Derives the schedule inputs for a run: with an approximate oracle of
/// precision `eps`, the regression guarantee carries `eps1 = sqrt(T eps)`
/// and the constraint relaxation `eps2 = eps`.
fn schedule_inputs<E: Environment>(
    env: &E,
    config: &RunConfig,
    design_size: usize,
) -> ScheduleInputs {
    let (auto_eps1, auto_eps2) = match config.oracle {
        OracleMode::Exact => (0.0, 0.0),
        OracleMode::Approximate { eps, .. } => ((config.rounds as f64 * eps).sqrt(), eps),
    };
    ScheduleInputs {
        dim: env.dim(),
        horizon: env.horizon(),
        design_size,
        gamma: config.gamma_override.unwrap_or_else(|| env.gamma()),
        eps1: config.eps1.unwrap_or(auto_eps1),
        eps2: config.eps2.unwrap_or(auto_eps2),
        eps_b: env.eps_b(),
        rounds: config.rounds,
    }
}

fn drive_run<E: Environment>(env: &E, config: &RunConfig) -> Result<RunResult> {
    let streams = RngStreams::new(config.seed);
    let mut rngs = streams.agent_rngs();
    let span_budget = env.dim() * env.horizon();

    if config.policy == PolicyKind::UniformRandom {
        let logs = run_uniform_baseline(env, config.rounds, &mut rngs)?;
        let metrics = collect_metrics(&logs);
        let span_failures = metrics.iter().filter(|m| !m.span_event).count();
        return Ok(RunResult {
            metrics,
            schedule: None,
            design_size: 0,
            dim: env.dim(),
            horizon: env.horizon(),
            span_budget,
            span_failures,
        });
    }

    let design = frank_wolfe_design(&env.design_features(), config.design_eps, 100_000)?;
    let inputs = schedule_inputs(env, config, design.support_size());
    let override_scale = match config.policy {
        PolicyKind::Greedy => 0.0,
        _ => config.scale_override,
    };
    let schedule = compute_schedule(inputs)?.with_override(override_scale);
    let agent_config = AgentConfig {
        oracle: config.oracle,
        known_reward: config.known_reward,
    };
    let logs = run_experiment(
        env,
        &design,
        &schedule,
        agent_config,
        WalkConfig::default(),
        config.rounds,
        &mut rngs,
    )?;
    let metrics = collect_metrics(&logs);
    let span_failures = metrics.iter().filter(|m| !m.span_event).count();
    Ok(RunResult {
        metrics,
        schedule: Some(schedule),
        design_size: design.support_size(),
        dim: env.dim(),
        horizon: env.horizon(),
        span_budget,
        span_failures,
    })
}

pub fn execute_run(config: &RunConfig) -> Result<RunResult> {
    match load_env_spec(&config.env_spec)? {
        ParsedEnv::Tabular(env) => drive_run(&env, config),
        ParsedEnv::Anisotropic(env) => drive_run(&env, config),
        ParsedEnv::Lqr(env) => drive_run(&env, config),
    }
}

/// Renders the per-round metrics. The `wall_ms` column is pinned to zero so
/// that reruns of the same config stay byte-identical; real timings live in
/// the in-memory logs and are printed to stderr by the CLI.
pub fn render_metrics_csv(metrics: &[RoundMetrics]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for m in metrics {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},0",
            m.round,
            m.regret_inst,
            m.regret_cum,
            m.span_event as u8,
            m.optimism as u8,
            m.residual_max
        );
    }
    out
}

pub fn render_summary(config: &RunConfig, result: &RunResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "rounds = {}", result.metrics.len());
    let _ = writeln!(out, "seed = {}", config.seed);
    let _ = writeln!(out, "dim = {}", result.dim);
    let _ = writeln!(out, "horizon = {}", result.horizon);
    let _ = writeln!(out, "design_support = {}", result.design_size);
    let _ = writeln!(out, "final_cum_regret = {}", result.final_cum_regret());
    let _ = writeln!(
        out,
        "span_failures = {} (budget d*H = {})",
        result.span_failures, result.span_budget
    );
    let _ = writeln!(out, "optimism_frequency = {}", result.optimism_frequency());
    let max_residual = result
        .metrics
        .iter()
        .map(|m| m.residual_max)
        .fold(0.0_f64, f64::max);
    let _ = writeln!(out, "max_residual = {max_residual}");
    out
}

pub fn render_schedule(result: &RunResult) -> String {
    match &result.schedule {
        None => "policy = uniform (no schedule)\n".to_string(),
        Some(s) => {
            let mut out = String::new();
            let _ = writeln!(out, "scale_override = {}", s.scale_override);
            let _ = writeln!(out, "sigma_r = {}", s.sigma_r);
            let _ = writeln!(out, "b_p_err = {}", s.b_p_err);
            let _ = writeln!(out, "b_r_err = {}", s.b_r_err);
            let _ = writeln!(out, "b_r_noise = {}", s.b_r_noise);
            for h in 1..=result.horizon {
                let _ = writeln!(
                    out,
                    "h = {h}: w = {}, sigma = {}, noise_envelope = {}",
                    s.width(h),
                    s.sigma(h),
                    s.noise_envelope(h)
                );
            }
            let _ = writeln!(out, "w0 = {}", s.w0);
            out
        }
    }
}

/// Executes a run and writes `metrics.csv`, `summary.txt`, and
/// `schedule.txt` into the configured output directory.
pub fn cli_run(config: &RunConfig) -> Result<RunResult> {
    let result = execute_run(config)?;
    std::fs::create_dir_all(&config.out_dir)?;
    std::fs::write(
        config.out_dir.join("metrics.csv"),
        render_metrics_csv(&result.metrics),
    )?;
    std::fs::write(
        config.out_dir.join("summary.txt"),
        render_summary(config, &result),
    )?;
    std::fs::write(config.out_dir.join("schedule.txt"), render_schedule(&result))?;
    Ok(result)
}

#[derive(Debug)]
pub struct SweepReport {
    pub results: Vec<(usize, u64, Result<RunResult>)>,
    pub failed: usize,
}

/// Runs every config concurrently (run-local state only) and aggregates the
/// regret curves into `sweep.csv`: one row per run and round, with the
/// cross-run mean and standard error of the cumulative regret appended.
pub fn cli_sweep(configs: &[RunConfig], parallelism: usize, out_dir: &Path) -> Result<SweepReport> {
    std::fs::create_dir_all(out_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::OracleFailure(format!("thread pool: {e}")))?;
    let results: Vec<(usize, u64, Result<RunResult>)> = pool.install(|| {
        configs
            .par_iter()
            .enumerate()
            .map(|(idx, config)| {
                let mut run_config = config.clone();
                run_config.out_dir = out_dir.join(format!("run_{idx:03}_seed{}", config.seed));
                (idx, config.seed, cli_run(&run_config))
            })
            .collect()
    });

    let succeeded: Vec<(usize, u64, &RunResult)> = results
        .iter()
        .filter_map(|(idx, seed, r)| r.as_ref().ok().map(|res| (*idx, *seed, res)))
        .collect();
    let max_rounds = succeeded
        .iter()
        .map(|(_, _, r)| r.metrics.len())
        .max()
        .unwrap_or(0);
    let mut mean = vec![0.0_f64; max_rounds];
    let mut stderr = vec![0.0_f64; max_rounds];
    for round_idx in 0..max_rounds {
        let values: Vec<f64> = succeeded
            .iter()
            .filter_map(|(_, _, r)| r.metrics.get(round_idx).map(|m| m.regret_cum))
            .collect();
        let n = values.len() as f64;
        if n > 0.0 {
            let mu = values.iter().sum::<f64>() / n;
            mean[round_idx] = mu;
            if n > 1.0 {
                let var = values.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1.0);
                stderr[round_idx] = (var / n).sqrt();
            }
        }
    }

    let mut csv = String::from(
        "run,seed,round,regret_inst,regret_cum,span_event,optimism,mean_regret_cum,stderr_regret_cum\n",
    );
    for (idx, seed, result) in &succeeded {
        for m in &result.metrics {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{}",
                idx,
                seed,
                m.round,
                m.regret_inst,
                m.regret_cum,
                m.span_event as u8,
                m.optimism as u8,
                mean[m.round - 1],
                stderr[m.round - 1]
            );
        }
    }
    std::fs::write(out_dir.join("sweep.csv"), csv)?;

    let failed = results.iter().filter(|(_, _, r)| r.is_err()).count();
    Ok(SweepReport { results, failed })
}

/// Environment verification report: the completeness residuals, the
/// eigenvalue-floor constant, the design certificate, and the linear
/// optimization radius.
pub fn cli_verify(env_path: &Path, probes: usize, seed: u64) -> Result<String> {
    let parsed = load_env_spec(env_path)?;
    let mut out = String::new();
    let _ = writeln!(out, "kind = {}", parsed.kind());
    let _ = writeln!(out, "d = {}", parsed.dim());
    let _ = writeln!(out, "horizon = {}", parsed.horizon());

    fn section<E: Environment>(env: &E, probes: usize, seed: u64, out: &mut String) -> Result<()> {
        let mut rng = RngStreams::new(seed).stream("verify");
        let report = verify_lbc(env, probes, &mut rng)?;
        let _ = writeln!(out, "{report}");
        let _ = writeln!(out, "gamma = {}", env.gamma());
        match frank_wolfe_design(&env.design_features(), 0.01, 100_000) {
            Ok(design) => {
                let g = design_g_value(&design, &env.design_features())?;
                let _ = writeln!(
                    out,
                    "design: g(rho) = {g}, support = {} (cap d(d+1)/2 = {})",
                    design.support_size(),
                    env.dim() * (env.dim() + 1) / 2
                );
            }
            Err(e) => {
                let _ = writeln!(out, "design: unavailable ({e})");
            }
        }
        match env.lin_opt_radius() {
            Some(r) => {
                let _ = writeln!(out, "linopt_radius = {r}");
            }
            None => {
                let _ = writeln!(out, "linopt_radius = n/a (no scaled basis in the feature set)");
            }
        }
        Ok(())
    }

    match &parsed {
        ParsedEnv::Tabular(env) => section(env, probes, seed, &mut out)?,
        ParsedEnv::Anisotropic(env) => section(env, probes, seed, &mut out)?,
        ParsedEnv::Lqr(env) => section(env, probes, seed, &mut out)?,
    }
    Ok(out)
}

/// Computes and serializes the D-optimal design for an environment spec.
pub fn cli_design(env_path: &Path, eps: f64, out_path: &Path) -> Result<DesignMeasure> {
    let parsed = load_env_spec(env_path)?;
    let features = match &parsed {
        ParsedEnv::Tabular(env) => env.design_features(),
        ParsedEnv::Anisotropic(env) => env.design_features(),
        ParsedEnv::Lqr(env) => env.design_features(),
    };
    let design = frank_wolfe_design(&features, eps, 100_000)?;
    let mut text = String::new();
    let _ = writeln!(text, "dim = {}", design.dim);
    let _ = writeln!(text, "support = {}", design.support_size());
    let _ = writeln!(text, "log_det = {}", design.log_det());
    for (phi, w) in design.support.iter().zip(&design.weights) {
        let coords: Vec<String> = phi.iter().map(|x| format!("{x}")).collect();
        let _ = writeln!(text, "{} {}", w, coords.join(" "));
    }
    if let Some(parent) = out_path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(out_path, text)?;
    Ok(design)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn temp_dir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!(
            "nsrlsvi-harness-{tag}-{}",
            std::process::id()
        ));
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    fn write_fixture_env(dir: &Path) -> PathBuf {
        let path = dir.join("env.spec");
        std::fs::write(
            &path,
            "kind = tabular\nhorizon = 2\nlayers = 1x2,2x1\n\
             transitions = 0,1,0,0\nrewards = 0.6,0.1,0.3,0.9\n\
             reward_noise = none\ninit_states = 0\n",
        )
        .unwrap();
        path
    }

    fn config_for(dir: &Path, rounds: usize, seed: u64) -> RunConfig {
        let env = write_fixture_env(dir);
        RunConfig {
            env_spec: env,
            rounds,
            seed,
            oracle: OracleMode::Exact,
            eps1: None,
            eps2: None,
            scale_override: 1e-3,
            known_reward: false,
            policy: PolicyKind::Algorithm,
            gamma_override: None,
            design_eps: 0.01,
            out_dir: dir.join("out"),
        }
    }

    #[test]
    fn zero_rounds_produce_header_only_metrics() {
        let dir = temp_dir("zero");
        let config = config_for(&dir, 0, 1);
        cli_run(&config).unwrap();
        let csv = std::fs::read_to_string(config.out_dir.join("metrics.csv")).unwrap();
        assert_eq!(csv, format!("{METRICS_HEADER}\n"));
    }

    #[test]
    fn reruns_are_byte_identical() {
        let dir = temp_dir("determinism");
        let config = config_for(&dir, 120, 5);
        cli_run(&config).unwrap();
        let first = std::fs::read(config.out_dir.join("metrics.csv")).unwrap();
        cli_run(&config).unwrap();
        let second = std::fs::read(config.out_dir.join("metrics.csv")).unwrap();
        assert_eq!(first, second);
        let summary = std::fs::read_to_string(config.out_dir.join("summary.txt")).unwrap();
        assert!(summary.contains("span_failures"));
    }

    #[test]
    fn greedy_baseline_locks_onto_the_suboptimal_path() {
        let dir = temp_dir("greedy");
        let mut config = config_for(&dir, 300, 3);
        config.policy = PolicyKind::Greedy;
        let greedy = execute_run(&config).unwrap();
        // Greedy never tries the out-of-span action; regret stays linear at
        // 0.1 per round.
        let expected = 0.1 * config.rounds as f64;
        assert!((greedy.final_cum_regret() - expected).abs() < 1e-6);

        config.policy = PolicyKind::Algorithm;
        config.scale_override = 1e-2;
        let algo = execute_run(&config).unwrap();
        assert!(
            algo.final_cum_regret() < greedy.final_cum_regret(),
            "exploration must beat greedy: {} vs {}",
            algo.final_cum_regret(),
            greedy.final_cum_regret()
        );
    }

    #[test]
    fn sweep_bookkeeping_rows() {
        let dir = temp_dir("sweep");
        let configs: Vec<RunConfig> = (1..=4u64)
            .map(|seed| config_for(&dir, 30, seed))
            .collect();
        let report = cli_sweep(&configs, 2, &dir.join("sweep_out")).unwrap();
        assert_eq!(report.failed, 0);
        let csv = std::fs::read_to_string(dir.join("sweep_out/sweep.csv")).unwrap();
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows.len(), 1 + 4 * 30);
        assert!(rows[0].contains("mean_regret_cum"));
    }

    #[test]
    fn empty_sweep_is_ok() {
        let dir = temp_dir("sweep-empty");
        let report = cli_sweep(&[], 1, &dir.join("out")).unwrap();
        assert_eq!(report.failed, 0);
        let csv = std::fs::read_to_string(dir.join("out/sweep.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1);
    }

    #[test]
    fn verify_report_on_tabular_fixture() {
        let dir = temp_dir("verify");
        let env = write_fixture_env(&dir);
        let report = cli_verify(&env, 20, 0).unwrap();
        assert!(report.contains("LBC exact"), "{report}");
        assert!(report.contains("gamma = 1"));
        assert!(report.contains("design: g(rho) ="));
        assert!(report.contains("linopt_radius = 1"));
    }

    #[test]
    fn invalid_reward_spec_names_the_bound() {
        let dir = temp_dir("invalid");
        let path = dir.join("bad.spec");
        std::fs::write(
            &path,
            "kind = tabular\nhorizon = 1\nlayers = 1x1\ntransitions = 0\nrewards = 2.0\n",
        )
        .unwrap();
        match cli_verify(&path, 5, 0) {
            Err(Error::InvalidEnv(msg)) => assert!(msg.contains("[0,1]")),
            other => panic!("expected invalid env, got {other:?}"),
        }
    }

    #[test]
    fn run_config_parses_and_env_var_overrides_seed() {
        let dir = temp_dir("config");
        write_fixture_env(&dir);
        let text = "env_spec = env.spec\nrounds = 10\nseed = 3\npolicy = greedy\n";
        let config = RunConfig::parse(text, &dir).unwrap();
        assert_eq!(config.seed, 3);
        assert_eq!(config.policy, PolicyKind::Greedy);
        assert_eq!(config.rounds, 10);

        std::env::set_var("NSRLSVI_SEED", "99");
        let config = RunConfig::parse(text, &dir).unwrap();
        std::env::remove_var("NSRLSVI_SEED");
        assert_eq!(config.seed, 99);
    }
}
