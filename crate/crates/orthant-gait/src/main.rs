//! Command-line front end: baseline simulation, single training runs,
//! checkpoint evaluation and full multi-seed experiments.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{ArgAction, Parser, Subcommand};

use orthant_gait::env::{EnvConfig, DEFAULT_SLOPE};
use orthant_gait::harness::config::{parse_seed_list, FileConfig};
use orthant_gait::harness::{
    self, run_paths, ControllerKind, ExperimentSpec, SimulateOptions,
};
use orthant_gait::reward::RewardSetup;
use orthant_gait::rl::TrainConfig;

#[derive(Parser)]
#[command(
    name = "orthant-gait",
    version,
    about = "Compass-gait walker: simulation, orthant-cycle rewards and PPO training"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Roll out the virtual-gravity baseline (or zero control) and
    /// report distance, fall status and cycle conformance.
    Simulate {
        /// Controller: virtual-gravity | zero.
        #[arg(long)]
        controller: Option<ControllerKind>,
        /// Virtual slope angle in rad.
        #[arg(long)]
        phi: Option<f64>,
        /// Control period in seconds.
        #[arg(long)]
        dt: Option<f64>,
        /// Reward setup used for the trace's reward columns.
        #[arg(long)]
        setup: Option<RewardSetup>,
        /// Punish holding a cycle location (strict orthant reward).
        #[arg(long, action = ArgAction::SetTrue)]
        strict_orthant: bool,
        /// Simulation time budget in seconds.
        #[arg(long)]
        max_time: Option<f64>,
        /// Trace CSV path (default <out-root>/trace.csv).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Flat key-value config file; flags override file values.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train one PPO run and write checkpoint + learning log.
    Train {
        #[arg(long)]
        setup: Option<RewardSetup>,
        #[arg(long)]
        seed: Option<u64>,
        /// Total environment steps.
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, action = ArgAction::SetTrue)]
        strict_orthant: bool,
        /// Run directory (default <out-root>/runs/<setup>/seed<k>).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Deterministically evaluate a checkpoint.
    Evaluate {
        /// Path to a checkpoint.json produced by `train`.
        checkpoint: PathBuf,
        /// Number of evaluation episodes (deterministic, so identical).
        #[arg(long)]
        episodes: Option<u32>,
        /// Reward setup for the reported return.
        #[arg(long)]
        setup: Option<RewardSetup>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, action = ArgAction::SetTrue)]
        strict_orthant: bool,
        /// Optional evaluation trace CSV path.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the multi-setup multi-seed sweep and aggregate the results.
    Experiment {
        /// Comma-separated setups (default all four).
        #[arg(long)]
        setups: Option<String>,
        /// Comma list (`0,1,2`) or range (`0..15`) of seeds.
        #[arg(long)]
        seeds: Option<String>,
        /// Environment steps per run.
        #[arg(long)]
        steps: Option<u64>,
        /// Parallel training jobs.
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        phi: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, action = ArgAction::SetTrue)]
        strict_orthant: bool,
        /// Normalize all curves by the sparse-setup baseline return.
        #[arg(long, action = ArgAction::SetTrue)]
        shared_baseline: bool,
        /// Experiment directory (default <out-root>).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

/// Default output root: $ORTHANT_GAIT_OUT or ./out.
fn out_root() -> PathBuf {
    std::env::var_os("ORTHANT_GAIT_OUT").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out"))
}

fn load_file_config(path: &Option<PathBuf>) -> Result<FileConfig> {
    match path {
        Some(p) => FileConfig::load(p).with_context(|| format!("reading config {}", p.display())),
        None => Ok(FileConfig::default()),
    }
}

/// Environment with the file-configurable knobs applied.
fn build_env(
    file: &FileConfig,
    setup: RewardSetup,
    dt: Option<f64>,
    strict_cli: bool,
) -> Result<EnvConfig> {
    let defaults = EnvConfig::default();
    let strict_file: bool = file.get("strict_orthant")?.unwrap_or(false);
    Ok(EnvConfig {
        dt_control: file.resolve(dt, "dt", defaults.dt_control)?,
        substeps: file.get("substeps")?.unwrap_or(defaults.substeps),
        horizon: file.get("horizon")?.unwrap_or(defaults.horizon),
        u_max: file.get("u_max")?.unwrap_or(defaults.u_max),
        reward_setup: setup,
        strict_orthant_reward: strict_cli || strict_file,
        ..defaults
    })
}

fn resolve_setup(file: &FileConfig, cli: Option<RewardSetup>) -> Result<RewardSetup> {
    Ok(file.resolve(cli, "setup", RewardSetup::Sparse)?)
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate { controller, phi, dt, setup, strict_orthant, max_time, out, config } => {
            let file = load_file_config(&config)?;
            let setup = resolve_setup(&file, setup)?;
            let env = build_env(&file, setup, dt, strict_orthant)?;
            let opts = SimulateOptions {
                controller: file.resolve(controller, "controller", ControllerKind::VirtualGravity)?,
                phi: file.resolve(phi, "phi", DEFAULT_SLOPE)?,
                max_time: file.resolve(max_time, "max_time", env.horizon)?,
                trace_out: Some(match out {
                    Some(path) => path,
                    None => match file.raw("out") {
                        Some(p) => PathBuf::from(p).join("trace.csv"),
                        None => out_root().join("trace.csv"),
                    },
                }),
                env,
            };
            let (summary, _) = harness::simulate(&opts).context("simulation failed")?;
            println!("controller:        {:?}", opts.controller);
            println!("control steps:     {}", summary.control_steps);
            println!("distance:          {:.4} m", summary.distance);
            println!("total reward:      {:.4} ({})", summary.total_reward, setup.name());
            println!("impacts:           {}", summary.impacts);
            println!(
                "fell:              {}",
                if summary.fell { "yes" } else { "no (reached horizon)" }
            );
            println!(
                "cycle entry:       {}",
                summary
                    .cycle_entered_at
                    .map(|i| format!("sample {i}"))
                    .unwrap_or_else(|| "never".into())
            );
            println!("cycle violations:  {}", summary.cycle_violations);
            if let Some(path) = &opts.trace_out {
                println!("trace:             {}", path.display());
            }
            Ok(())
        }
        Command::Train { setup, seed, steps, dt, strict_orthant, out, config } => {
            let file = load_file_config(&config)?;
            let setup = resolve_setup(&file, setup)?;
            let seed = file.resolve(seed, "seed", 0)?;
            let steps = file.resolve(steps, "steps", TrainConfig::default().total_steps)?;
            let env = build_env(&file, setup, dt, strict_orthant)?;
            let paths = match out {
                Some(dir) => harness::RunPaths {
                    log_csv: dir.join("log.csv"),
                    evals_csv: dir.join("evals.csv"),
                    checkpoint: dir.join("checkpoint.json"),
                    dir,
                },
                None => run_paths(&out_root(), setup, seed),
            };
            let outcome =
                harness::train_run(&env, &TrainConfig::default(), setup, seed, steps, &paths)
                    .context("training failed")?;
            let last_eval = outcome.log.evals.last();
            println!("setup:      {}", setup.name());
            println!("seed:       {seed}");
            println!("steps:      {steps}");
            println!("episodes:   {}", outcome.log.episodes.len());
            println!("updates:    {}", outcome.log.updates.len());
            if let Some(e) = last_eval {
                println!("final eval: return {:.4}, distance {:.4} m", e.ret, e.distance);
            }
            println!("artifacts:  {}", paths.dir.display());
            Ok(())
        }
        Command::Evaluate { checkpoint, episodes, setup, dt, strict_orthant, out, config } => {
            let file = load_file_config(&config)?;
            let setup = resolve_setup(&file, setup)?;
            let episodes = file.resolve(episodes, "episodes", 1)?;
            let env = build_env(&file, setup, dt, strict_orthant)?;
            let metrics =
                harness::evaluate_checkpoint(&checkpoint, &env, episodes, out.as_deref())
                    .with_context(|| format!("evaluating {}", checkpoint.display()))?;
            println!("episodes:   {}", metrics.episodes);
            println!("return:     {:.4} ({})", metrics.mean_return, setup.name());
            println!("distance:   {:.4} m", metrics.mean_distance);
            if let Some(path) = out {
                println!("trace:      {}", path.display());
            }
            Ok(())
        }
        Command::Experiment {
            setups,
            seeds,
            steps,
            jobs,
            phi,
            dt,
            strict_orthant,
            shared_baseline,
            out,
            config,
        } => {
            let file = load_file_config(&config)?;
            let out_dir = match out {
                Some(dir) => dir,
                None => file.raw("out").map(PathBuf::from).unwrap_or_else(out_root),
            };
            let setups_text = setups
                .or_else(|| file.raw("setups").map(String::from))
                .unwrap_or_else(|| "sparse,for,or,for_plus_or".into());
            let parsed_setups: Vec<RewardSetup> = setups_text
                .split(',')
                .map(|s| {
                    RewardSetup::from_name(s.trim())
                        .ok_or_else(|| anyhow::anyhow!("unknown setup '{s}'"))
                })
                .collect::<Result<_>>()?;
            let seeds_text =
                seeds.or_else(|| file.raw("seeds").map(String::from)).unwrap_or_else(|| "0..15".into());
            let parsed_seeds = match parse_seed_list(&seeds_text) {
                Ok(s) => s,
                Err(e) => bail!("bad --seeds: {e}"),
            };
            let env = build_env(&file, RewardSetup::Sparse, dt, strict_orthant)?;
            let shared_file: bool = file.get("shared_baseline")?.unwrap_or(false);
            let spec = ExperimentSpec {
                setups: parsed_setups,
                seeds: parsed_seeds,
                steps_per_run: file.resolve(steps, "steps", 500_000)?,
                env,
                train: TrainConfig::default(),
                out_dir,
                jobs: file.resolve(jobs, "jobs", 1)?,
                shared_baseline: shared_baseline || shared_file,
                phi: file.resolve(phi, "phi", DEFAULT_SLOPE)?,
            };
            let (report, stats) = harness::run_experiment(&spec).context("experiment failed")?;
            println!(
                "runs: {} trained, {} skipped (already complete), {} failed",
                stats.trained,
                stats.skipped,
                stats.failed.len()
            );
            for (setup, seed, error) in &stats.failed {
                eprintln!("warning: {setup}/seed{seed} failed: {error}");
            }
            println!("baseline distance: {:.4} m", report.baseline_distance);
            for (setup, ret) in &report.baseline_returns {
                println!("baseline return ({setup}): {ret:.4}");
            }
            for row in &report.stddevs {
                println!(
                    "{}: best-reward std {:.4}, best-distance std {:.4}",
                    row.setup, row.best_reward_std, row.best_distance_std
                );
            }
            println!("artifacts in {}", spec.out_dir.display());
            if !stats.failed.is_empty() {
                bail!("{} run(s) failed; aggregate covers completed runs only", stats.failed.len());
            }
            Ok(())
        }
    }
}
