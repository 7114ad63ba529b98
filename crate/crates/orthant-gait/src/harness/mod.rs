//! Experiment orchestration: baseline rollouts, single training runs,
//! multi-seed sweeps with resumability, normalization against the
//! baseline controller and aggregate CSV artifacts.
//!
//! Layout of an experiment directory:
//!
//! ```text
//! out/
//!   runs/<setup>/seed<k>/log.csv        per-episode learning log
//!   runs/<setup>/seed<k>/evals.csv      periodic deterministic evals
//!   runs/<setup>/seed<k>/checkpoint.json
//!   learning_curves.csv                 mean normalized return per setup
//!   distances.csv                       best distance per (setup, seed)
//!   stddev.csv                          spread of the per-seed bests
//!   plot_learning_curves.py             renders the two figures
//!   plot_distances.py
//! ```
//!
//! A run is complete when all three of its artifacts exist; completed
//! runs are never retrained, so re-running an experiment over a finished
//! directory only re-aggregates.

pub mod config;
pub mod csvio;
pub mod plots;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use thiserror::Error;

use crate::automaton::cycle_monitor;
use crate::env::{
    rollout, virtual_gravity_control, EnvConfig, EnvError, EpisodeTrace, DEFAULT_SLOPE,
};
use crate::plant::Control;
use crate::reward::RewardSetup;
use crate::rl::checkpoint::{load_checkpoint, save_checkpoint, write_atomic, CheckpointError};
use crate::rl::{
    evaluate, evaluate_controller, read_learning_log_csv, train, EvalMetrics, LearningLogRow,
    TrainConfig, TrainError, TrainOutcome,
};
use config::ConfigError;
use csvio::{CurveRow, DistanceRow, EvalRow, StdRow};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("training run failed: {0}")]
    RunFailed(String),
    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),
}

/// A full sweep: every (setup, seed) pair at a fixed step budget.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub setups: Vec<RewardSetup>,
    pub seeds: Vec<u64>,
    pub steps_per_run: u64,
    pub env: EnvConfig,
    pub train: TrainConfig,
    pub out_dir: PathBuf,
    /// Parallel training jobs.
    pub jobs: usize,
    /// Normalize all curves by the baseline return under the sparse
    /// setup instead of per-setup baselines.
    pub shared_baseline: bool,
    /// Slope angle of the virtual-gravity baseline controller.
    pub phi: f64,
}

impl ExperimentSpec {
    pub fn new(out_dir: PathBuf) -> Self {
        Self {
            setups: RewardSetup::ALL.to_vec(),
            seeds: (0..15).collect(),
            steps_per_run: 500_000,
            env: EnvConfig::default(),
            train: TrainConfig::default(),
            out_dir,
            jobs: 1,
            shared_baseline: false,
            phi: DEFAULT_SLOPE,
        }
    }

    fn validate(&self) -> Result<(), HarnessError> {
        if self.setups.is_empty() {
            return Err(HarnessError::InvalidSpec("no reward setups selected".into()));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::InvalidSpec("no seeds selected".into()));
        }
        if self.jobs == 0 {
            return Err(HarnessError::InvalidSpec("jobs must be >= 1".into()));
        }
        if self.steps_per_run == 0 {
            return Err(HarnessError::InvalidSpec("steps_per_run must be >= 1".into()));
        }
        Ok(())
    }
}

/// Everything the aggregation step derives from the run artifacts.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateReport {
    /// Walking distance of the virtual-gravity baseline (setup
    /// independent).
    pub baseline_distance: f64,
    /// Episode return of the baseline controller under each setup's
    /// reward weights.
    pub baseline_returns: Vec<(String, f64)>,
    pub curves: Vec<CurveRow>,
    pub distances: Vec<DistanceRow>,
    pub stddevs: Vec<StdRow>,
}

/// What an invocation actually did.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunStats {
    pub trained: usize,
    pub skipped: usize,
    /// (setup, seed, error message) for runs that failed this invocation.
    pub failed: Vec<(String, u64, String)>,
}

/// Paths of one run's artifacts.
#[derive(Debug, Clone)]
pub struct RunPaths {
    pub dir: PathBuf,
    pub log_csv: PathBuf,
    pub evals_csv: PathBuf,
    pub checkpoint: PathBuf,
}

pub fn run_paths(out_dir: &Path, setup: RewardSetup, seed: u64) -> RunPaths {
    let dir = out_dir.join("runs").join(setup.name()).join(format!("seed{seed}"));
    RunPaths {
        log_csv: dir.join("log.csv"),
        evals_csv: dir.join("evals.csv"),
        checkpoint: dir.join("checkpoint.json"),
        dir,
    }
}

pub fn run_complete(paths: &RunPaths) -> bool {
    paths.log_csv.is_file() && paths.evals_csv.is_file() && paths.checkpoint.is_file()
}

/// Trains one (setup, seed) run and writes its artifacts atomically into
/// `paths.dir`. On a non-finite loss the partial log is flushed and an
/// error marker is left in place of the checkpoint.
pub fn train_run(
    env_base: &EnvConfig,
    train_base: &TrainConfig,
    setup: RewardSetup,
    seed: u64,
    steps: u64,
    paths: &RunPaths,
) -> Result<TrainOutcome, HarnessError> {
    fs::create_dir_all(&paths.dir)?;
    let env_cfg = EnvConfig { reward_setup: setup, ..env_base.clone() };
    let train_cfg = TrainConfig { seed, total_steps: steps, ..train_base.clone() };

    let outcome = match train(&env_cfg, &train_cfg) {
        Ok(outcome) => outcome,
        Err(TrainError::NonFiniteLoss { update, log }) => {
            let mut bytes = Vec::new();
            log.write_episode_csv(&mut bytes)?;
            write_atomic(&paths.log_csv, &bytes)?;
            let message = format!("non-finite loss at update {update}");
            write_atomic(&paths.dir.join("failed.txt"), message.as_bytes())?;
            return Err(HarnessError::RunFailed(message));
        }
        Err(e) => return Err(HarnessError::RunFailed(e.to_string())),
    };

    let mut log_bytes = Vec::new();
    outcome.log.write_episode_csv(&mut log_bytes)?;
    write_atomic(&paths.log_csv, &log_bytes)?;

    let eval_rows: Vec<EvalRow> = outcome
        .log
        .evals
        .iter()
        .map(|e| EvalRow { update: e.update, step: e.step, ret: e.ret, distance: e.distance })
        .collect();
    write_atomic(&paths.evals_csv, csvio::write_evals_csv(&eval_rows).as_bytes())?;

    save_checkpoint(&paths.checkpoint, &outcome.policy, &train_cfg)?;
    Ok(outcome)
}

/// Runs the sweep (skipping completed runs), then aggregates whatever
/// artifacts are present into the report and the experiment CSVs.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<(AggregateReport, RunStats), HarnessError> {
    spec.validate()?;
    fs::create_dir_all(&spec.out_dir)?;

    let mut pending: Vec<(RewardSetup, u64)> = Vec::new();
    let mut stats = RunStats::default();
    for &setup in &spec.setups {
        for &seed in &spec.seeds {
            if run_complete(&run_paths(&spec.out_dir, setup, seed)) {
                stats.skipped += 1;
            } else {
                pending.push((setup, seed));
            }
        }
    }

    let failures = Mutex::new(Vec::new());
    let next = AtomicUsize::new(0);
    let workers = spec.jobs.min(pending.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= pending.len() {
                    break;
                }
                let (setup, seed) = pending[i];
                let paths = run_paths(&spec.out_dir, setup, seed);
                if let Err(e) =
                    train_run(&spec.env, &spec.train, setup, seed, spec.steps_per_run, &paths)
                {
                    failures.lock().unwrap().push((setup.name().to_string(), seed, e.to_string()));
                }
            });
        }
    });
    stats.failed = failures.into_inner().unwrap();
    stats.failed.sort();
    stats.trained = pending.len() - stats.failed.len();

    let report = aggregate(spec)?;
    write_report_artifacts(&spec.out_dir, &report)?;
    Ok((report, stats))
}

/// Episode return of the virtual-gravity controller under one setup.
pub fn baseline_metrics(
    env_base: &EnvConfig,
    setup: RewardSetup,
    phi: f64,
) -> Result<EvalMetrics, EnvError> {
    let env_cfg = EnvConfig { reward_setup: setup, ..env_base.clone() };
    let params = env_cfg.params;
    evaluate_controller(&env_cfg, |s| virtual_gravity_control(&params, s, phi), 1)
}

/// Builds the report purely from the artifacts on disk plus the
/// (deterministic) baseline rollouts.
pub fn aggregate(spec: &ExperimentSpec) -> Result<AggregateReport, HarnessError> {
    let mut baseline_returns = Vec::new();
    let mut baseline_distance = 0.0;
    for &setup in &spec.setups {
        let metrics = baseline_metrics(&spec.env, setup, spec.phi)?;
        baseline_distance = metrics.mean_distance;
        baseline_returns.push((setup.name().to_string(), metrics.mean_return));
    }
    let shared_norm = if spec.shared_baseline {
        let metrics = baseline_metrics(&spec.env, RewardSetup::Sparse, spec.phi)?;
        Some(metrics.mean_return)
    } else {
        None
    };

    let n_updates = spec.steps_per_run.div_ceil(spec.train.n_steps as u64);
    let mut curves = Vec::new();
    let mut distances = Vec::new();
    let mut stddevs = Vec::new();

    for (&setup, baseline) in spec.setups.iter().zip(&baseline_returns) {
        let norm = shared_norm.unwrap_or(baseline.1);
        let mut per_seed_curves: Vec<Vec<f64>> = Vec::new();
        let mut best_distances = Vec::new();
        let mut best_norm_returns = Vec::new();

        for &seed in &spec.seeds {
            let paths = run_paths(&spec.out_dir, setup, seed);
            if !run_complete(&paths) {
                continue;
            }
            let log = read_learning_log_csv(std::io::BufReader::new(fs::File::open(
                &paths.log_csv,
            )?))?;
            per_seed_curves.push(update_window_returns(
                &log,
                spec.train.n_steps as u64,
                n_updates,
            ));
            let evals = csvio::read_evals_csv(std::io::BufReader::new(fs::File::open(
                &paths.evals_csv,
            )?))?;
            let best_dist =
                evals.iter().map(|e| e.distance).fold(f64::NEG_INFINITY, f64::max);
            let best_ret = evals.iter().map(|e| e.ret).fold(f64::NEG_INFINITY, f64::max);
            best_distances.push(best_dist);
            best_norm_returns.push(best_ret / norm);
            distances.push(DistanceRow {
                setup: setup.name().to_string(),
                seed: Some(seed),
                best_distance: best_dist,
            });
        }

        for u in 0..n_updates as usize {
            let values: Vec<f64> =
                per_seed_curves.iter().filter_map(|c| c.get(u)).copied().collect();
            if values.is_empty() {
                continue;
            }
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            curves.push(CurveRow {
                setup: setup.name().to_string(),
                step: (u as u64 + 1) * spec.train.n_steps as u64,
                norm_return_mean: mean / norm,
            });
        }

        stddevs.push(StdRow {
            setup: setup.name().to_string(),
            best_reward_std: csvio::sample_std(&best_norm_returns),
            best_distance_std: csvio::sample_std(&best_distances),
        });
    }

    distances.push(DistanceRow {
        setup: "baseline".to_string(),
        seed: None,
        best_distance: baseline_distance,
    });

    Ok(AggregateReport { baseline_distance, baseline_returns, curves, distances, stddevs })
}

/// Mean training-episode return per update window (steps grouped into
/// buckets of `n_steps`), carrying the last value through windows in
/// which no episode finished.
fn update_window_returns(log: &[LearningLogRow], n_steps: u64, n_updates: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_updates as usize);
    let mut at = 0usize;
    let mut carry = 0.0;
    for u in 1..=n_updates {
        let end = u * n_steps;
        let mut sum = 0.0;
        let mut count = 0usize;
        while at < log.len() && log[at].step <= end {
            sum += log[at].ret;
            count += 1;
            at += 1;
        }
        if count > 0 {
            carry = sum / count as f64;
        }
        out.push(carry);
    }
    out
}

fn write_report_artifacts(out_dir: &Path, report: &AggregateReport) -> Result<(), HarnessError> {
    write_atomic(
        &out_dir.join("learning_curves.csv"),
        csvio::write_curves_csv(&report.curves).as_bytes(),
    )?;
    write_atomic(
        &out_dir.join("distances.csv"),
        csvio::write_distances_csv(&report.distances).as_bytes(),
    )?;
    write_atomic(&out_dir.join("stddev.csv"), csvio::write_stddev_csv(&report.stddevs).as_bytes())?;
    write_atomic(
        &out_dir.join("plot_learning_curves.py"),
        plots::LEARNING_CURVES_SCRIPT.as_bytes(),
    )?;
    write_atomic(&out_dir.join("plot_distances.py"), plots::DISTANCES_SCRIPT.as_bytes())?;
    Ok(())
}

/// Which controller `simulate` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerKind {
    VirtualGravity,
    Zero,
}

/// Error for unrecognized controller names.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown controller '{0}' (expected virtual-gravity|zero)")]
pub struct ParseControllerError(String);

impl std::str::FromStr for ControllerKind {
    type Err = ParseControllerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "virtual-gravity" | "vg" => Ok(Self::VirtualGravity),
            "zero" => Ok(Self::Zero),
            other => Err(ParseControllerError(other.to_string())),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulateOptions {
    pub controller: ControllerKind,
    pub phi: f64,
    pub env: EnvConfig,
    pub max_time: f64,
    pub trace_out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateSummary {
    pub control_steps: usize,
    pub distance: f64,
    pub fell: bool,
    pub truncated: bool,
    pub total_reward: f64,
    pub impacts: usize,
    pub cycle_entered_at: Option<usize>,
    pub cycle_violations: usize,
}

/// Rolls out the selected controller, optionally writes the trace CSV,
/// and summarizes distance, termination and cycle conformance.
pub fn simulate(opts: &SimulateOptions) -> Result<(SimulateSummary, EpisodeTrace), HarnessError> {
    let params = opts.env.params;
    let phi = opts.phi;
    let trace = match opts.controller {
        ControllerKind::VirtualGravity => rollout(
            &opts.env,
            |s| virtual_gravity_control(&params, s, phi),
            opts.max_time,
        )?,
        ControllerKind::Zero => rollout(&opts.env, |_| Control::ZERO, opts.max_time)?,
    };
    if let Some(path) = &opts.trace_out {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent)?;
            }
        }
        let mut bytes = Vec::new();
        trace.write_csv(&mut bytes)?;
        write_atomic(path, &bytes)?;
    }
    let report = cycle_monitor(&trace.states());
    let summary = SimulateSummary {
        control_steps: trace.samples.len().saturating_sub(1),
        distance: trace.distance(),
        fell: trace.terminated,
        truncated: trace.truncated,
        total_reward: trace.total_reward(),
        impacts: trace.impact_count(),
        cycle_entered_at: report.entered_at,
        cycle_violations: report.violations.len(),
    };
    Ok((summary, trace))
}

/// Loads a checkpoint and evaluates it deterministically; optionally
/// writes the evaluation trace.
pub fn evaluate_checkpoint(
    checkpoint: &Path,
    env: &EnvConfig,
    episodes: u32,
    trace_out: Option<&Path>,
) -> Result<EvalMetrics, HarnessError> {
    let (policy, _train_cfg) = load_checkpoint(checkpoint)?;
    let metrics = evaluate(&policy, env, episodes)?;
    if let Some(path) = trace_out {
        let trace = rollout(env, |s| policy.mean_control(&s.phase()), env.horizon)?;
        let mut bytes = Vec::new();
        trace.write_csv(&mut bytes)?;
        write_atomic(path, &bytes)?;
    }
    Ok(metrics)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn update_window_means_carry_forward() {
        let row = |step: u64, ret: f64| LearningLogRow {
            step,
            episode: 0,
            ret,
            length: 0,
            distance: 0.0,
            policy_loss: 0.0,
            value_loss: 0.0,
            approx_kl: 0.0,
            clip_fraction: 0.0,
        };
        let log = vec![row(100, 1.0), row(150, 3.0), row(450, 10.0)];
        // Windows of 200 steps: [0,200] mean 2.0; (200,400] empty ->
        // carry 2.0; (400,600] mean 10.0.
        assert_eq!(update_window_returns(&log, 200, 3), vec![2.0, 2.0, 10.0]);
    }

    #[test]
    fn controller_kind_parses() {
        assert_eq!("virtual-gravity".parse::<ControllerKind>(), Ok(ControllerKind::VirtualGravity));
        assert_eq!("vg".parse::<ControllerKind>(), Ok(ControllerKind::VirtualGravity));
        assert_eq!("zero".parse::<ControllerKind>(), Ok(ControllerKind::Zero));
        assert!("hop".parse::<ControllerKind>().is_err());
    }

    #[test]
    fn baseline_normalized_return_is_unity_per_setup() {
        let env = EnvConfig::default();
        for setup in RewardSetup::ALL {
            let m = baseline_metrics(&env, setup, DEFAULT_SLOPE).unwrap();
            assert!((m.mean_return / m.mean_return - 1.0).abs() < 1e-15);
            assert!(m.mean_return.is_finite() && m.mean_return.abs() > 1e-9);
        }
    }

    #[test]
    fn simulate_zero_controller_falls() {
        let opts = SimulateOptions {
            controller: ControllerKind::Zero,
            phi: DEFAULT_SLOPE,
            env: EnvConfig::default(),
            max_time: 10.0,
            trace_out: None,
        };
        let (summary, _) = simulate(&opts).unwrap();
        assert!(summary.fell);
        assert!(summary.control_steps < 1000);
    }

    #[test]
    fn simulate_virtual_gravity_walks() {
        let opts = SimulateOptions {
            controller: ControllerKind::VirtualGravity,
            phi: DEFAULT_SLOPE,
            env: EnvConfig::default(),
            max_time: 10.0,
            trace_out: None,
        };
        let (summary, trace) = simulate(&opts).unwrap();
        assert!(!summary.fell);
        assert!(summary.truncated);
        assert!(summary.distance > 1.0);
        assert!(summary.impacts >= 6);
        assert_eq!(summary.control_steps, 1000);
        assert_eq!(trace.samples.len(), 1001);
    }
}
