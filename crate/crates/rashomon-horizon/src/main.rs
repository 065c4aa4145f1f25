//! Thin CLI over the experiment harness.
//!
//! Exit codes: 0 success, 2 config error, 3 stage failure, 4 missing
//! artifacts.

use clap::{Parser, Subcommand, ValueEnum};
use rashomon_horizon::error::{Error, Result};
use rashomon_horizon::harness::{
    run_lyapunov, run_pipeline, run_report, run_select, run_simulate, ExperimentConfig,
    GridConfig,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GridPreset {
    Desk,
    Full,
}

#[derive(Parser, Debug)]
#[command(
    name = "rashomon-horizon",
    about = "Horizon-constrained Rashomon sets for chaotic forecasting",
    version
)]
struct Cli {
    /// Experiment config (JSON); the built-in desk experiment when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the config's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides the config's out_dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the hyperparameter grid preset.
    #[arg(long, global = true, value_enum)]
    grid: Option<GridPreset>,
    /// Rayon worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the configured trajectory as CSV plus metadata.
    Simulate,
    /// Run the full experiment: pool, exponent, sets, diagnostics,
    /// selection.
    Pipeline,
    /// Emit figure-data CSVs from completed runs under --out.
    Report,
    /// Estimate the maximum Lyapunov exponent (plus the twin-run oracle on
    /// synthetic systems).
    Lyapunov,
    /// Run the minimal chain ending at decision-aligned selection.
    Select,
}

fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::desk_default(),
    };
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = Some(out.clone());
    }
    if let Some(grid) = cli.grid {
        cfg.grid = GridConfig::Named(
            match grid {
                GridPreset::Desk => "desk",
                GridPreset::Full => "full",
            }
            .into(),
        );
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    cfg.out_dir
        .clone()
        .ok_or_else(|| Error::Config("no output directory: pass --out or set out_dir".into()))
}

fn dispatch(cli: &Cli) -> Result<()> {
    if let Command::Report = cli.command {
        let dir = cli
            .out
            .clone()
            .ok_or_else(|| Error::Config("report needs --out pointing at completed runs".into()))?;
        let written = run_report(&dir)?;
        for path in written {
            println!("{}", path.display());
        }
        return Ok(());
    }

    let cfg = resolve_config(cli)?;
    let out = out_dir(&cfg)?;
    match cli.command {
        Command::Simulate => {
            let path = run_simulate(&cfg, &out)?;
            println!("{}", path.display());
        }
        Command::Pipeline => {
            let summary = run_pipeline(&cfg, &out)?;
            println!(
                "lambda_max={:.4} contraction_rate={:.4} (r2={:.3}) rho_l={:.4} chosen={:?} \
                 utilities: aligned={:.4} single_best={:.4} ensemble={:.4} random={:.4} oracle={:.4}",
                summary.lambda_max,
                summary.contraction.rate,
                summary.contraction.r2,
                summary.rho_l,
                summary.chosen_model,
                summary.chosen_utility,
                summary.single_best_utility,
                summary.ensemble_utility,
                summary.random_utility,
                summary.oracle_utility,
            );
            println!("artifacts: {}", out.display());
        }
        Command::Lyapunov => {
            let artifacts = run_lyapunov(&cfg, &out)?;
            match &artifacts.benettin {
                Some(oracle) => println!(
                    "lambda_max={:.4} (r2={:.3}, low_confidence={}) oracle={:.4} (se {:.4})",
                    artifacts.lambda_max,
                    artifacts.r2,
                    artifacts.low_confidence,
                    oracle.lambda_max,
                    oracle.std_error,
                ),
                None => println!(
                    "lambda_max={:.4} (r2={:.3}, low_confidence={})",
                    artifacts.lambda_max, artifacts.r2, artifacts.low_confidence,
                ),
            }
        }
        Command::Select => {
            let result = run_select(&cfg, &out)?;
            println!(
                "chosen={:?} utility={:.4} (single_best={:.4} ensemble={:.4} random={:.4} oracle={:.4})",
                result.chosen.model_index,
                result.chosen.utility,
                result.single_best.utility,
                result.ensemble.utility,
                result.random.utility,
                result.oracle.utility,
            );
        }
        Command::Report => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        // Best effort: the global pool may already exist in-process.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::from(err.exit_code())
        }
    }
}
