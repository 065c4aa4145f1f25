//! The end-to-end experiment pipeline and the smaller single-purpose runs
//! behind the CLI subcommands.
//!
//! Every run writes its resolved config into the output directory first, so
//! partial artifacts always sit next to their exact provenance. Stage
//! failures abort with the stage name; artifacts written so far remain.

use super::artifacts::{fmt_f64, write_csv, write_json};
use super::config::{EpsilonConfig, ExperimentConfig, SystemConfig};
use crate::decision::{
    sample_complexity_sweep, select_model, DecisionConfig, OptimizerRoute, SelectionContext,
    SelectionResult, SweepCurve,
};
use crate::dynamics::{
    load_csv, simulate_ks, simulate_lorenz96, split_standardize, write_trajectory_csv, SplitResult,
    Trajectory, TrajectorySource,
};
use crate::error::{Error, Result};
use crate::lyapunov::{benettin_oracle, estimate_lyapunov, BenettinEstimate, LyapunovEstimate};
use crate::rashomon::{
    build_sets, calibrate_schedule, epsilon_schedule, evaluate_losses, fit_contraction,
    multiplicity_report, ContractionFit, EpsilonSchedule, HorizonLossTable, MultiplicityReport,
    RashomonSets,
};
use crate::reservoir::{enumerate_grid, train_pool, ModelPool};
use crate::seeding::derive_seed;
use serde::Serialize;
use std::path::{Path, PathBuf};

// Seed streams under the master seed.
const STREAM_SIMULATE: u64 = 1;
const STREAM_POOL: u64 = 2;
const STREAM_SELECTION: u64 = 3;
const STREAM_BENETTIN: u64 = 4;

fn stage<T>(name: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().map_err(Error::at_stage(name))
}

/// Generate (or load) the configured trajectory.
pub fn build_trajectory(cfg: &ExperimentConfig) -> Result<Trajectory> {
    let seed = derive_seed(cfg.master_seed, STREAM_SIMULATE);
    match &cfg.system {
        SystemConfig::Lorenz96 {
            d,
            f,
            dt,
            steps,
            transient,
            sample_stride,
        } => {
            let raw = simulate_lorenz96(*d, *f, *dt, steps * sample_stride, seed, *transient)?;
            subsample(&raw, *sample_stride)
        }
        SystemConfig::Ks {
            n,
            l,
            dt,
            steps,
            transient,
            sample_stride,
        } => {
            let raw = simulate_ks(*n, *l, *dt, steps * sample_stride, seed, *transient)?;
            subsample(&raw, *sample_stride)
        }
        SystemConfig::External { path, dt } => load_csv(path, *dt),
    }
}

/// Keep every stride-th row, scaling dt accordingly.
pub fn subsample(traj: &Trajectory, stride: usize) -> Result<Trajectory> {
    if stride <= 1 {
        return Trajectory::new(traj.data().to_owned(), traj.dt(), traj.source());
    }
    let data = traj.data();
    let rows: Vec<usize> = (0..data.nrows()).step_by(stride).collect();
    let out = ndarray::Array2::from_shape_fn((rows.len(), data.ncols()), |(i, j)| {
        data[[rows[i], j]]
    });
    Trajectory::new(out, traj.dt() * stride as f64, traj.source())
}

fn write_config(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    write_json(&out.join("config.json"), cfg)
}

/// `simulate`: trajectory CSV plus metadata.
pub fn run_simulate(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf> {
    cfg.validate()?;
    write_config(cfg, out)?;
    let traj = stage("simulate", || build_trajectory(cfg))?;
    let csv_path = out.join("trajectory.csv");
    stage("simulate", || write_trajectory_csv(&traj, &csv_path))?;
    #[derive(Serialize)]
    struct Meta<'a> {
        system: &'a SystemConfig,
        master_seed: u64,
        steps: usize,
        dim: usize,
        dt: f64,
    }
    write_json(
        &out.join("trajectory_meta.json"),
        &Meta {
            system: &cfg.system,
            master_seed: cfg.master_seed,
            steps: traj.steps(),
            dim: traj.dim(),
            dt: traj.dt(),
        },
    )?;
    Ok(csv_path)
}

/// Exponent artifacts for one trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct LyapunovArtifacts {
    pub lambda_max: f64,
    pub fit_start: usize,
    pub fit_end: usize,
    pub r2: f64,
    pub low_confidence: bool,
    pub m: usize,
    pub tau: usize,
    pub theiler: usize,
    pub benettin: Option<BenettinEstimate>,
}

fn lyapunov_artifacts(
    cfg: &ExperimentConfig,
    traj: &Trajectory,
    out: &Path,
) -> Result<(LyapunovEstimate, Option<BenettinEstimate>)> {
    let estimate = estimate_lyapunov(traj, None)?;
    let benettin = match traj.source() {
        TrajectorySource::External => None,
        _ => Some(benettin_oracle(
            &cfg.system.spec(),
            100_000,
            derive_seed(cfg.master_seed, STREAM_BENETTIN),
        )?),
    };
    let artifacts = LyapunovArtifacts {
        lambda_max: estimate.lambda_max,
        fit_start: estimate.fit_start,
        fit_end: estimate.fit_end,
        r2: estimate.r2,
        low_confidence: estimate.low_confidence,
        m: estimate.params.m,
        tau: estimate.params.tau,
        theiler: estimate.params.theiler,
        benettin,
    };
    write_json(&out.join("lyapunov.json"), &artifacts)?;
    let rows: Vec<Vec<String>> = estimate
        .curve
        .values
        .iter()
        .enumerate()
        .map(|(j, v)| {
            vec![
                j.to_string(),
                fmt_f64(j as f64 * estimate.curve.dt),
                fmt_f64(*v),
            ]
        })
        .collect();
    write_csv(&out.join("divergence.csv"), &["j", "t", "d_j"], &rows)?;
    Ok((estimate, benettin))
}

/// `lyapunov`: exponent estimate plus oracle on the configured system.
pub fn run_lyapunov(cfg: &ExperimentConfig, out: &Path) -> Result<LyapunovArtifacts> {
    cfg.validate()?;
    write_config(cfg, out)?;
    let traj = stage("simulate", || build_trajectory(cfg))?;
    let (estimate, benettin) = stage("lyapunov", || lyapunov_artifacts(cfg, &traj, out))?;
    Ok(LyapunovArtifacts {
        lambda_max: estimate.lambda_max,
        fit_start: estimate.fit_start,
        fit_end: estimate.fit_end,
        r2: estimate.r2,
        low_confidence: estimate.low_confidence,
        m: estimate.params.m,
        tau: estimate.params.tau,
        theiler: estimate.params.theiler,
        benettin,
    })
}

fn losses_csv(table: &HorizonLossTable, out: &Path) -> Result<()> {
    let mut rows = Vec::new();
    for h in 0..table.n_models() {
        for k in 0..table.k_max() {
            rows.push(vec![
                h.to_string(),
                (k + 1).to_string(),
                fmt_f64(table.losses[[h, k]]),
                table.n_eval.to_string(),
            ]);
        }
    }
    write_csv(
        &out.join("losses.csv"),
        &["model", "horizon", "loss", "n_eval"],
        &rows,
    )
}

fn sets_artifacts(sets: &RashomonSets, out: &Path) -> Result<()> {
    write_json(&out.join("sets.json"), sets)?;
    let size_rows: Vec<Vec<String>> = (0..sets.k_max())
        .map(|k| {
            vec![
                (k + 1).to_string(),
                sets.members[k].len().to_string(),
                fmt_f64(sets.eps[k]),
                fmt_f64(sets.l_star[k]),
            ]
        })
        .collect();
    write_csv(
        &out.join("set_sizes.csv"),
        &["horizon", "size", "eps", "l_star"],
        &size_rows,
    )?;
    let mut member_rows = Vec::new();
    for (k, members) in sets.members.iter().enumerate() {
        for h in members {
            member_rows.push(vec![(k + 1).to_string(), h.to_string()]);
        }
    }
    write_csv(
        &out.join("membership.csv"),
        &["horizon", "model"],
        &member_rows,
    )
}

fn multiplicity_artifacts(report: &MultiplicityReport, out: &Path) -> Result<()> {
    write_json(&out.join("multiplicity.json"), report)?;
    let k_max = report.agreement.len();
    let header: Vec<String> = std::iter::once("horizon".to_string())
        .chain((1..=k_max).map(|k| format!("k{k}")))
        .collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = (0..k_max)
        .map(|i| {
            std::iter::once((i + 1).to_string())
                .chain(report.agreement[i].iter().map(|v| fmt_f64(*v)))
                .collect()
        })
        .collect();
    write_csv(&out.join("agreement.csv"), &header_refs, &rows)?;
    let amb_rows: Vec<Vec<String>> = report
        .ambiguity
        .iter()
        .enumerate()
        .map(|(k, a)| vec![(k + 1).to_string(), fmt_f64(*a)])
        .collect();
    write_csv(&out.join("ambiguity.csv"), &["horizon", "ambiguity"], &amb_rows)
}

fn selection_artifacts(result: &SelectionResult, out: &Path) -> Result<()> {
    write_json(&out.join("selection.json"), result)
}

fn sweep_artifacts(curve: &SweepCurve, out: &Path) -> Result<()> {
    let rows: Vec<Vec<String>> = curve
        .sizes
        .iter()
        .zip(curve.mean_gap.iter().zip(&curve.std_err))
        .map(|(s, (m, e))| vec![s.to_string(), fmt_f64(*m), fmt_f64(*e)])
        .collect();
    write_csv(
        &out.join("sweep.csv"),
        &["sample_size", "mean_gap", "std_err"],
        &rows,
    )
}

/// Everything the full pipeline measured, echoed into `manifest.json`.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineSummary {
    pub config: ExperimentConfig,
    pub stages: Vec<String>,
    pub lambda_max: f64,
    pub lambda_low_confidence: bool,
    pub benettin: Option<BenettinEstimate>,
    pub lambda_used: f64,
    pub contraction: ContractionFit,
    pub rho_l: f64,
    pub classical_ratio: f64,
    pub ambiguity_eff: f64,
    pub set_size_first: usize,
    pub set_size_last: usize,
    pub schedule: EpsilonSchedule,
    pub schedule_feasible: bool,
    pub chosen_model: Option<usize>,
    pub chosen_utility: f64,
    pub single_best_utility: f64,
    pub ensemble_utility: f64,
    pub random_utility: f64,
    pub oracle_utility: f64,
    pub intersection_size: usize,
    pub used_fallback: bool,
}

struct PipelineState {
    split: SplitResult,
    pool: ModelPool,
    table: HorizonLossTable,
    schedule: EpsilonSchedule,
    schedule_feasible: bool,
    sets: RashomonSets,
}

fn prepare_pool_and_sets(
    cfg: &ExperimentConfig,
    traj: &Trajectory,
    out: &Path,
) -> Result<PipelineState> {
    let split = stage("split", || split_standardize(traj, &cfg.split))?;

    let pool = stage("train_pool", || {
        let axes = cfg.grid.axes()?;
        let configs = enumerate_grid(&axes, &cfg.reservoir.base_config())?;
        let mut pool = train_pool(&configs, &split.train, derive_seed(cfg.master_seed, STREAM_POOL))?;
        pool.axes = Some(axes);
        pool.save_with(&out.join("pool"), cfg.save_models)?;
        Ok(pool)
    })?;

    let table = stage("evaluate_losses", || {
        let table = evaluate_losses(&pool, &split.val, cfg.horizons, cfg.warmup, cfg.max_windows)?;
        losses_csv(&table, out)?;
        Ok(table)
    })?;

    let (schedule, feasible) = stage("schedule", || match &cfg.epsilon {
        EpsilonConfig::Explicit { alpha, beta, gamma } => {
            Ok((epsilon_schedule(&table, *alpha, *beta, *gamma)?, true))
        }
        EpsilonConfig::Band { band } => {
            let outcome = calibrate_schedule(&table, (band[0], band[1]))?;
            Ok((outcome.schedule, outcome.feasible))
        }
    })?;
    write_json(&out.join("schedule.json"), &schedule)?;

    let sets = stage("build_sets", || {
        let sets = build_sets(&table, &schedule)?;
        sets_artifacts(&sets, out)?;
        Ok(sets)
    })?;

    Ok(PipelineState {
        split,
        pool,
        table,
        schedule,
        schedule_feasible: feasible,
        sets,
    })
}

fn decision_config(cfg: &ExperimentConfig, lambda_used: f64, dt: f64) -> Result<DecisionConfig> {
    let p_k = cfg.decision.p_k.resolve(cfg.horizons)?;
    let dc = DecisionConfig {
        p_k,
        lambda_max: lambda_used,
        dt,
    };
    dc.validate()?;
    Ok(dc)
}

/// `pipeline`: the full experiment.
pub fn run_pipeline(cfg: &ExperimentConfig, out: &Path) -> Result<PipelineSummary> {
    cfg.validate()?;
    write_config(cfg, out)?;
    let mut stages_done: Vec<String> = Vec::new();
    let mut mark = |name: &str| stages_done.push(name.to_string());

    let traj = stage("simulate", || build_trajectory(cfg))?;
    if cfg.write_trajectory {
        stage("simulate", || write_trajectory_csv(&traj, &out.join("trajectory.csv")))?;
    }
    mark("simulate");

    let (estimate, benettin) = stage("lyapunov", || lyapunov_artifacts(cfg, &traj, out))?;
    mark("lyapunov");
    let lambda_used = cfg.decision.lambda_override.unwrap_or(estimate.lambda_max);

    let state = prepare_pool_and_sets(cfg, &traj, out)?;
    mark("split");
    mark("train_pool");
    mark("evaluate_losses");
    mark("schedule");
    mark("build_sets");

    let contraction = stage("fit_contraction", || {
        let fit = fit_contraction(&state.sets)?;
        write_json(&out.join("contraction.json"), &fit)?;
        Ok(fit)
    })?;
    mark("fit_contraction");

    let dc = decision_config(cfg, lambda_used, state.split.val.dt())?;
    let report = stage("multiplicity", || {
        let report = multiplicity_report(
            &state.pool,
            &state.sets,
            &state.split.val,
            &dc.p_k,
            lambda_used,
            cfg.warmup,
            cfg.max_windows,
        )?;
        multiplicity_artifacts(&report, out)?;
        Ok(report)
    })?;
    mark("multiplicity");

    let selection = stage("selection", || {
        let ctx = SelectionContext {
            pool: &state.pool,
            sets: &state.sets,
            table: &state.table,
            cfg: &dc,
            utility: &cfg.decision.utility,
            space: &cfg.decision.action_space,
            val: &state.split.val,
            test: &state.split.test,
            warmup: cfg.warmup,
            max_windows: cfg.max_windows,
            route: OptimizerRoute::Auto,
        };
        let result = select_model(
            &ctx,
            cfg.decision.sample_size,
            derive_seed(cfg.master_seed, STREAM_SELECTION),
        )?;
        selection_artifacts(&result, out)?;
        if let Some(sweep) = &cfg.decision.sweep {
            let curve = sample_complexity_sweep(
                &ctx,
                &sweep.sizes,
                sweep.repeats,
                derive_seed(cfg.master_seed, STREAM_SELECTION),
            )?;
            sweep_artifacts(&curve, out)?;
        }
        Ok(result)
    })?;
    mark("selection");

    let summary = PipelineSummary {
        config: cfg.clone(),
        stages: stages_done,
        lambda_max: estimate.lambda_max,
        lambda_low_confidence: estimate.low_confidence,
        benettin,
        lambda_used,
        contraction,
        rho_l: report.rho_l,
        classical_ratio: report.classical_ratio,
        ambiguity_eff: report.ambiguity_eff,
        set_size_first: state.sets.members.first().map_or(0, Vec::len),
        set_size_last: state.sets.members.last().map_or(0, Vec::len),
        schedule: state.schedule,
        schedule_feasible: state.schedule_feasible,
        chosen_model: selection.chosen.model_index,
        chosen_utility: selection.chosen.utility,
        single_best_utility: selection.single_best.utility,
        ensemble_utility: selection.ensemble.utility,
        random_utility: selection.random.utility,
        oracle_utility: selection.oracle.utility,
        intersection_size: selection.intersection_size,
        used_fallback: selection.used_fallback,
    };
    write_json(&out.join("manifest.json"), &summary)?;
    Ok(summary)
}

/// `select`: the minimal chain ending at decision-aligned selection.
pub fn run_select(cfg: &ExperimentConfig, out: &Path) -> Result<SelectionResult> {
    cfg.validate()?;
    write_config(cfg, out)?;
    let traj = stage("simulate", || build_trajectory(cfg))?;
    let state = prepare_pool_and_sets(cfg, &traj, out)?;

    let lambda_used = match cfg.decision.lambda_override {
        Some(l) => l,
        None => match traj.source() {
            TrajectorySource::External => {
                return Err(Error::Config(
                    "external series need decision.lambda_override (no oracle is available)".into(),
                ))
            }
            _ => {
                stage("lyapunov", || {
                    benettin_oracle(
                        &cfg.system.spec(),
                        50_000,
                        derive_seed(cfg.master_seed, STREAM_BENETTIN),
                    )
                })?
                .lambda_max
            }
        },
    };
    let dc = decision_config(cfg, lambda_used, state.split.val.dt())?;

    let selection = stage("selection", || {
        let ctx = SelectionContext {
            pool: &state.pool,
            sets: &state.sets,
            table: &state.table,
            cfg: &dc,
            utility: &cfg.decision.utility,
            space: &cfg.decision.action_space,
            val: &state.split.val,
            test: &state.split.test,
            warmup: cfg.warmup,
            max_windows: cfg.max_windows,
            route: OptimizerRoute::Auto,
        };
        let result = select_model(
            &ctx,
            cfg.decision.sample_size,
            derive_seed(cfg.master_seed, STREAM_SELECTION),
        )?;
        selection_artifacts(&result, out)?;
        if let Some(sweep) = &cfg.decision.sweep {
            let curve = sample_complexity_sweep(
                &ctx,
                &sweep.sizes,
                sweep.repeats,
                derive_seed(cfg.master_seed, STREAM_SELECTION),
            )?;
            sweep_artifacts(&curve, out)?;
        }
        Ok(result)
    })?;
    Ok(selection)
}
