//! Horizon-aware decision-aligned selection.
//!
//! Candidates sampled from the intersection of the per-horizon Rashomon
//! sets are ranked by aggregated realized utility on the validation
//! segment, U(h) = sum_k p_k exp(-lambda k dt) U_k(h); the winner and the
//! baselines (single best by validation RMSE, ensemble average, random
//! member, oracle) are then scored on the held-out test segment with the
//! same weights.

use super::optimize::{optimize_action, OptimizerRoute};
use super::{ActionSpace, DecisionConfig, UtilityFn};
use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::rashomon::{
    eval_windows, model_forecasts, truth_tensor, EvalWindows, HorizonLossTable, RashomonSets,
};
use crate::reservoir::ModelPool;
use crate::seeding::derive_seed;
use ndarray::Array3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

const STREAM_SAMPLE: u64 = 0x5a;
const STREAM_RANDOM_BASELINE: u64 = 0x5b;

/// Mean realized utility of pre-computed forecasts at one horizon: the
/// forecast chooses the action, the truth pays it.
pub fn realized_utility_from(
    forecasts: &Array3<f64>,
    truths: &Array3<f64>,
    k: usize,
    u: &UtilityFn,
    space: &ActionSpace,
    route: &OptimizerRoute,
    seed: u64,
) -> Result<f64> {
    let (n_windows, k_max, _) = truths.dim();
    if k < 1 || k > k_max {
        return Err(Error::Domain(format!("horizon {k} outside 1..={k_max}")));
    }
    if forecasts.dim() != truths.dim() {
        return Err(Error::Shape(format!(
            "forecasts {:?} vs truths {:?}",
            forecasts.dim(),
            truths.dim()
        )));
    }
    let mut acc = 0.0;
    for w in 0..n_windows {
        let xhat: Vec<f64> = forecasts
            .index_axis(ndarray::Axis(0), w)
            .row(k - 1)
            .to_vec();
        if xhat.iter().any(|v| !v.is_finite()) {
            return Ok(f64::NEG_INFINITY);
        }
        let action = optimize_action(u, &xhat, space, route, derive_seed(seed, w as u64))?;
        let truth: Vec<f64> = truths.index_axis(ndarray::Axis(0), w).row(k - 1).to_vec();
        acc += u.evaluate(&truth, &action, space)?;
    }
    Ok(acc / n_windows as f64)
}

/// Realized utility of one trained model at one horizon over the standard
/// evaluation windows of a segment.
pub fn realized_utility(
    model: &crate::reservoir::ReservoirModel,
    eval: &Trajectory,
    k: usize,
    u: &UtilityFn,
    space: &ActionSpace,
    warmup: usize,
) -> Result<f64> {
    let windows = eval_windows(eval.steps(), k.max(1), warmup, 0)?;
    let truths = truth_tensor(eval, &windows);
    let forecasts = model_forecasts(model, eval, &windows)?;
    realized_utility_from(&forecasts, &truths, k, u, space, &OptimizerRoute::Auto, 0)
}

/// Aggregate per-horizon utilities with the decision weights
/// p_k exp(-lambda k dt). Horizons with p_k = 0 are skipped (their entries
/// may be NaN).
pub fn aggregate_utilities(per_horizon: &[Vec<f64>], cfg: &DecisionConfig) -> Vec<f64> {
    let weights = cfg.weights();
    per_horizon
        .iter()
        .map(|row| {
            row.iter()
                .zip(&weights)
                .filter(|(_, w)| **w > 0.0)
                .map(|(u, w)| u * w)
                .sum()
        })
        .collect()
}

fn argmax_lowest_index(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// One strategy's outcome on the test segment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrategyOutcome {
    /// Selected model, when the strategy picks a single one (the ensemble
    /// averages forecasts instead).
    pub model_index: Option<usize>,
    /// Aggregated realized test utility.
    pub utility: f64,
    /// Realized test utility per horizon (NaN where p_k = 0).
    pub per_horizon: Vec<f64>,
}

/// Everything a selection run produces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Sampled candidate ids, ascending.
    pub candidates: Vec<usize>,
    /// Validation U_k rows per candidate (NaN where p_k = 0).
    pub utility_rows_val: Vec<Vec<f64>>,
    /// Aggregated validation utilities per candidate.
    pub aggregated_val: Vec<f64>,
    pub chosen: StrategyOutcome,
    pub single_best: StrategyOutcome,
    pub ensemble: StrategyOutcome,
    pub random: StrategyOutcome,
    /// Best realized test utility over the compared single-model picks
    /// (candidates, single best, random) - a labeled upper bound.
    pub oracle: StrategyOutcome,
    pub intersection_size: usize,
    pub used_fallback: bool,
    pub fallback_horizon: Option<usize>,
    pub k_eff: f64,
}

/// Borrowed inputs for a selection run.
pub struct SelectionContext<'a> {
    pub pool: &'a ModelPool,
    pub sets: &'a RashomonSets,
    /// Validation loss table (the single-best baseline minimizes its RMSE
    /// at the modal horizon).
    pub table: &'a HorizonLossTable,
    pub cfg: &'a DecisionConfig,
    pub utility: &'a UtilityFn,
    pub space: &'a ActionSpace,
    pub val: &'a Trajectory,
    pub test: &'a Trajectory,
    pub warmup: usize,
    pub max_windows: usize,
    pub route: OptimizerRoute,
}

fn forecast_cache(
    pool: &ModelPool,
    indices: &BTreeSet<usize>,
    segment: &Trajectory,
    windows: &EvalWindows,
) -> Result<BTreeMap<usize, Array3<f64>>> {
    let list: Vec<usize> = indices.iter().copied().collect();
    let tensors: Vec<(usize, Result<Array3<f64>>)> = list
        .par_iter()
        .map(|&h| {
            let model = pool
                .model(h)
                .ok_or_else(|| Error::InsufficientData(format!("model {h} failed training")));
            (h, model.and_then(|m| model_forecasts(m, segment, windows)))
        })
        .collect();
    let mut out = BTreeMap::new();
    for (h, tensor) in tensors {
        out.insert(h, tensor?);
    }
    Ok(out)
}

/// Per-horizon realized utilities of one forecast tensor (NaN where
/// p_k = 0).
fn utility_row(
    forecasts: &Array3<f64>,
    truths: &Array3<f64>,
    cfg: &DecisionConfig,
    u: &UtilityFn,
    space: &ActionSpace,
    route: &OptimizerRoute,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut row = vec![f64::NAN; cfg.k_max()];
    for k in 1..=cfg.k_max() {
        if cfg.p_k[k - 1] > 0.0 {
            row[k - 1] = realized_utility_from(
                forecasts,
                truths,
                k,
                u,
                space,
                route,
                derive_seed(seed, k as u64),
            )?;
        }
    }
    Ok(row)
}

fn aggregate_row(row: &[f64], cfg: &DecisionConfig) -> f64 {
    aggregate_utilities(std::slice::from_ref(&row.to_vec()), cfg)[0]
}

/// Sample `count` indices uniformly without replacement, ascending.
fn sample_without_replacement(universe: &[usize], count: usize, seed: u64) -> Vec<usize> {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<usize> = universe.to_vec();
    let take = count.min(pool.len());
    for i in 0..take {
        let j = rng.random_range(i..pool.len());
        pool.swap(i, j);
    }
    let mut picked: Vec<usize> = pool[..take].to_vec();
    picked.sort_unstable();
    picked
}

/// Run horizon-aware decision alignment plus all baselines.
///
/// Candidates are drawn uniformly without replacement from the intersection
/// of the per-horizon sets (falling back to the modal-p_k horizon's set when
/// the intersection is empty, flagged). Selection maximizes the aggregated
/// validation utility with deterministic lowest-index tie-breaks; all
/// reported utilities come from the held-out test segment.
pub fn select_model(
    ctx: &SelectionContext,
    sample_size: usize,
    seed: u64,
) -> Result<SelectionResult> {
    ctx.cfg.validate()?;
    ctx.space.validate()?;
    ctx.utility.validate(ctx.space)?;
    if sample_size < 1 {
        return Err(Error::Config("sample size must be at least 1".into()));
    }
    if ctx.cfg.k_max() != ctx.sets.k_max() {
        return Err(Error::Shape(format!(
            "decision config has {} horizons, sets have {}",
            ctx.cfg.k_max(),
            ctx.sets.k_max()
        )));
    }

    let mut universe = ctx.sets.intersection();
    let mut used_fallback = false;
    let mut fallback_horizon = None;
    if universe.is_empty() {
        let modal = ctx.cfg.modal_horizon();
        universe = ctx.sets.members[modal - 1].clone();
        used_fallback = true;
        fallback_horizon = Some(modal);
        if universe.is_empty() {
            return Err(Error::InsufficientData(
                "no candidates: the modal horizon's set is empty".into(),
            ));
        }
    }
    let intersection_size = universe.len();
    let candidates = sample_without_replacement(&universe, sample_size, derive_seed(seed, STREAM_SAMPLE));

    // Single-best baseline: minimum validation RMSE at the modal horizon.
    let modal = ctx.cfg.modal_horizon();
    let single_best_id = {
        let column = ctx.table.losses.column(modal - 1);
        let mut best: Option<usize> = None;
        for (h, v) in column.iter().enumerate() {
            if v.is_finite() && best.is_none_or(|b| *v < column[b]) {
                best = Some(h);
            }
        }
        best.ok_or_else(|| Error::DegenerateColumn(modal))?
    };

    // Random baseline: uniform over the same candidate universe.
    let random_id = {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng =
            rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_RANDOM_BASELINE));
        universe[rng.random_range(0..universe.len())]
    };

    let k_max = ctx.cfg.k_max();
    let val_windows = eval_windows(ctx.val.steps(), k_max, ctx.warmup, ctx.max_windows)?;
    let test_windows = eval_windows(ctx.test.steps(), k_max, ctx.warmup, ctx.max_windows)?;
    let val_truths = truth_tensor(ctx.val, &val_windows);
    let test_truths = truth_tensor(ctx.test, &test_windows);

    // Validation utilities for the sampled candidates.
    let val_needed: BTreeSet<usize> = candidates.iter().copied().collect();
    let val_forecasts = forecast_cache(ctx.pool, &val_needed, ctx.val, &val_windows)?;
    let utility_rows_val: Vec<Vec<f64>> = candidates
        .iter()
        .map(|h| {
            utility_row(
                &val_forecasts[h],
                &val_truths,
                ctx.cfg,
                ctx.utility,
                ctx.space,
                &ctx.route,
                derive_seed(seed, *h as u64),
            )
        })
        .collect::<Result<_>>()?;
    let aggregated_val = aggregate_utilities(&utility_rows_val, ctx.cfg);
    let chosen_id = candidates[argmax_lowest_index(&aggregated_val)];

    // Test-side forecasts: picked models plus every member needed by the
    // ensemble at horizons with decision mass.
    let mut test_needed: BTreeSet<usize> = candidates.iter().copied().collect();
    test_needed.insert(single_best_id);
    test_needed.insert(random_id);
    for k in 1..=k_max {
        if ctx.cfg.p_k[k - 1] > 0.0 {
            test_needed.extend(ctx.sets.members[k - 1].iter().copied());
        }
    }
    let test_forecasts = forecast_cache(ctx.pool, &test_needed, ctx.test, &test_windows)?;

    let outcome_for = |id: usize| -> Result<StrategyOutcome> {
        let row = utility_row(
            &test_forecasts[&id],
            &test_truths,
            ctx.cfg,
            ctx.utility,
            ctx.space,
            &ctx.route,
            derive_seed(seed, 0x1000 + id as u64),
        )?;
        let utility = aggregate_row(&row, ctx.cfg);
        Ok(StrategyOutcome {
            model_index: Some(id),
            utility,
            per_horizon: row,
        })
    };

    let chosen = outcome_for(chosen_id)?;
    let single_best = outcome_for(single_best_id)?;
    let random = outcome_for(random_id)?;

    // Ensemble baseline: average member forecasts per horizon, decide on
    // the mean.
    let ensemble = {
        let (n_windows, _, d) = test_truths.dim();
        let mut mean = Array3::from_elem((n_windows, k_max, d), f64::NAN);
        for k in 1..=k_max {
            if ctx.cfg.p_k[k - 1] <= 0.0 {
                continue;
            }
            let members = &ctx.sets.members[k - 1];
            for w in 0..n_windows {
                for c in 0..d {
                    let mut acc = 0.0;
                    for h in members {
                        acc += test_forecasts[h][[w, k - 1, c]];
                    }
                    mean[[w, k - 1, c]] = acc / members.len() as f64;
                }
            }
        }
        let row = utility_row(
            &mean,
            &test_truths,
            ctx.cfg,
            ctx.utility,
            ctx.space,
            &ctx.route,
            derive_seed(seed, 0x2000),
        )?;
        let utility = aggregate_row(&row, ctx.cfg);
        StrategyOutcome {
            model_index: None,
            utility,
            per_horizon: row,
        }
    };

    // Oracle: the best test utility among the compared single-model picks.
    let oracle = {
        let mut ids: Vec<usize> = candidates.clone();
        ids.push(single_best_id);
        ids.push(random_id);
        ids.sort_unstable();
        ids.dedup();
        let mut best: Option<StrategyOutcome> = None;
        for id in ids {
            let outcome = outcome_for(id)?;
            if best.as_ref().is_none_or(|b| outcome.utility > b.utility) {
                best = Some(outcome);
            }
        }
        best.unwrap()
    };

    Ok(SelectionResult {
        candidates,
        utility_rows_val,
        aggregated_val,
        chosen,
        single_best,
        ensemble,
        random,
        oracle,
        intersection_size,
        used_fallback,
        fallback_horizon,
        k_eff: ctx.cfg.k_eff(),
    })
}

/// Mean oracle-gap curve as a function of candidate sample size.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepCurve {
    pub sizes: Vec<usize>,
    pub mean_gap: Vec<f64>,
    pub std_err: Vec<f64>,
}

/// For each |S| and repeat, sample candidates, select by aggregated
/// validation utility, and record the gap to the best validation utility
/// over the whole intersection. The gap is zero by construction once the
/// sample covers the intersection.
pub fn sample_complexity_sweep(
    ctx: &SelectionContext,
    sizes: &[usize],
    repeats: usize,
    seed: u64,
) -> Result<SweepCurve> {
    ctx.cfg.validate()?;
    if sizes.is_empty() || sizes.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Config("sizes must be non-empty and ascending".into()));
    }
    if repeats < 1 {
        return Err(Error::Config("repeats must be at least 1".into()));
    }
    let mut universe = ctx.sets.intersection();
    if universe.is_empty() {
        let modal = ctx.cfg.modal_horizon();
        universe = ctx.sets.members[modal - 1].clone();
    }
    if universe.is_empty() {
        return Err(Error::InsufficientData("no candidates to sweep over".into()));
    }

    let k_max = ctx.cfg.k_max();
    let val_windows = eval_windows(ctx.val.steps(), k_max, ctx.warmup, ctx.max_windows)?;
    let val_truths = truth_tensor(ctx.val, &val_windows);
    let needed: BTreeSet<usize> = universe.iter().copied().collect();
    let forecasts = forecast_cache(ctx.pool, &needed, ctx.val, &val_windows)?;

    // Aggregated validation utility for every intersection member, once.
    let mut utility: BTreeMap<usize, f64> = BTreeMap::new();
    let rows: Vec<(usize, Result<Vec<f64>>)> = universe
        .par_iter()
        .map(|&h| {
            (
                h,
                utility_row(
                    &forecasts[&h],
                    &val_truths,
                    ctx.cfg,
                    ctx.utility,
                    ctx.space,
                    &ctx.route,
                    derive_seed(seed, h as u64),
                ),
            )
        })
        .collect();
    for (h, row) in rows {
        utility.insert(h, aggregate_row(&row?, ctx.cfg));
    }
    let u_star = utility.values().cloned().fold(f64::NEG_INFINITY, f64::max);

    let mut mean_gap = Vec::with_capacity(sizes.len());
    let mut std_err = Vec::with_capacity(sizes.len());
    for (si, &size) in sizes.iter().enumerate() {
        let mut gaps = Vec::with_capacity(repeats);
        for rep in 0..repeats {
            let sample = sample_without_replacement(
                &universe,
                size,
                derive_seed(seed, 0x9000 + (si * repeats + rep) as u64),
            );
            let best = sample
                .iter()
                .map(|h| utility[h])
                .fold(f64::NEG_INFINITY, f64::max);
            gaps.push(u_star - best);
        }
        let n = gaps.len() as f64;
        let mean = gaps.iter().sum::<f64>() / n;
        let var = gaps.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>() / n;
        mean_gap.push(mean);
        std_err.push((var / n).sqrt());
    }
    Ok(SweepCurve {
        sizes: sizes.to_vec(),
        mean_gap,
        std_err,
    })
}
