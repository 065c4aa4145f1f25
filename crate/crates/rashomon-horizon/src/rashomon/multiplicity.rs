//! Forecast disagreement among Rashomon-set members: per-horizon ambiguity,
//! its decision-weighted aggregate, and the cross-horizon agreement matrix.

use super::losses::{eval_windows, model_forecasts, EvalWindows};
use super::{lyapunov_weighted_ratio, RashomonSets};
use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::reservoir::ModelPool;
use ndarray::{Array2, Array3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Pairwise-disagreement diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AmbiguityReport {
    /// Mean pairwise forecast distance among members at each horizon,
    /// normalized by the climatological scale of the evaluation segment.
    pub ambiguity: Vec<f64>,
    /// Decision-weighted aggregate sum_k p_k ambiguity_k.
    pub ambiguity_eff: f64,
    /// K x K Pearson correlations of pairwise prediction differences across
    /// horizons; symmetric with unit diagonal.
    pub agreement: Vec<Vec<f64>>,
    /// Horizons (1-based) whose set was a singleton (ambiguity forced 0).
    pub singleton_horizons: Vec<usize>,
}

/// Everything the multiplicity analysis produces for one pool.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiplicityReport {
    /// Mean of |R_k| / |H| over horizons.
    pub classical_ratio: f64,
    pub rho_l: f64,
    pub weights: Vec<f64>,
    pub ambiguity: Vec<f64>,
    pub ambiguity_eff: f64,
    pub agreement: Vec<Vec<f64>>,
    pub singleton_horizons: Vec<usize>,
}

fn climatological_scale(eval: &Trajectory) -> f64 {
    let data = eval.data();
    let t = data.nrows() as f64;
    let mut acc = 0.0;
    for c in 0..data.ncols() {
        let col = data.column(c);
        let mean = col.sum() / t;
        acc += col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / t;
    }
    (acc / data.ncols() as f64).sqrt()
}

/// Pearson correlation of two pooled samples; zero-variance pairs count as
/// perfect agreement (identical forecasts everywhere).
fn correlation_or_unit(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx < 1e-30 && syy < 1e-30 {
        return 1.0;
    }
    if sxx < 1e-30 || syy < 1e-30 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Forecast tensors for a set of model indices on shared windows, skipping
/// nothing: every requested index must be a trained model.
fn member_forecasts(
    pool: &ModelPool,
    indices: &[usize],
    eval: &Trajectory,
    windows: &EvalWindows,
) -> Result<BTreeMap<usize, Array3<f64>>> {
    let tensors: Vec<(usize, Result<Array3<f64>>)> = indices
        .par_iter()
        .map(|&h| {
            let model = pool.model(h).ok_or_else(|| {
                Error::InsufficientData(format!("set member {h} has no trained model"))
            });
            (h, model.and_then(|m| model_forecasts(m, eval, windows)))
        })
        .collect();
    let mut out = BTreeMap::new();
    for (h, tensor) in tensors {
        out.insert(h, tensor?);
    }
    Ok(out)
}

/// Per-horizon ambiguity and the cross-horizon agreement matrix.
///
/// Ambiguity at horizon k is the mean (over windows and unordered member
/// pairs) Euclidean distance between member forecasts, divided by the
/// climatological scale; singleton sets contribute zero and are flagged.
///
/// Agreement entry (i, j) is the Pearson correlation, pooled over member
/// pairs of the horizon-1 set, windows, and coordinates, between the
/// prediction differences at horizons i and j. Identical differences give
/// correlation 1, so the diagonal is 1 by construction and a pool of
/// identical forecasters yields an all-ones matrix.
pub fn ambiguity_and_agreement(
    pool: &ModelPool,
    sets: &RashomonSets,
    eval: &Trajectory,
    p_k: &[f64],
    warmup: usize,
    cap: usize,
) -> Result<AmbiguityReport> {
    let k_max = sets.k_max();
    if p_k.len() != k_max {
        return Err(Error::Shape(format!(
            "p_k has {} entries, sets have {k_max} horizons",
            p_k.len()
        )));
    }
    let p_sum: f64 = p_k.iter().sum();
    if p_k.iter().any(|p| *p < 0.0) || (p_sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "p_k must be non-negative and sum to 1, got sum {p_sum}"
        )));
    }
    if sets.members.iter().any(|m| m.is_empty()) {
        return Err(Error::InsufficientData(
            "every horizon must have at least one member".into(),
        ));
    }
    let windows = eval_windows(eval.steps(), k_max, warmup, cap)?;
    let scale = climatological_scale(eval);
    let union: Vec<usize> = {
        let mut all: Vec<usize> = sets.members.iter().flatten().copied().collect();
        all.sort_unstable();
        all.dedup();
        all
    };
    let forecasts = member_forecasts(pool, &union, eval, &windows)?;
    let n_windows = windows.anchors.len();
    let d = eval.dim();

    let mut ambiguity = Vec::with_capacity(k_max);
    let mut singletons = Vec::new();
    for k in 0..k_max {
        let members = &sets.members[k];
        if members.len() < 2 {
            ambiguity.push(0.0);
            singletons.push(k + 1);
            continue;
        }
        let mut acc = 0.0;
        let mut count = 0usize;
        for w in 0..n_windows {
            for (a_pos, &a) in members.iter().enumerate() {
                for &b in &members[a_pos + 1..] {
                    let fa = &forecasts[&a];
                    let fb = &forecasts[&b];
                    let mut dist2 = 0.0;
                    for c in 0..d {
                        let diff = fa[[w, k, c]] - fb[[w, k, c]];
                        dist2 += diff * diff;
                    }
                    acc += dist2.sqrt();
                    count += 1;
                }
            }
        }
        ambiguity.push(acc / count as f64 / scale);
    }
    let ambiguity_eff = p_k.iter().zip(&ambiguity).map(|(p, a)| p * a).sum();

    // Prediction differences of horizon-1 member pairs, pooled per horizon.
    let base = &sets.members[0];
    let mut agreement = vec![vec![1.0; k_max]; k_max];
    if base.len() >= 2 {
        let mut deltas: Vec<Vec<f64>> = vec![Vec::new(); k_max];
        for (a_pos, &a) in base.iter().enumerate() {
            for &b in &base[a_pos + 1..] {
                let fa = &forecasts[&a];
                let fb = &forecasts[&b];
                for w in 0..n_windows {
                    for c in 0..d {
                        for (k, bucket) in deltas.iter_mut().enumerate() {
                            bucket.push(fa[[w, k, c]] - fb[[w, k, c]]);
                        }
                    }
                }
            }
        }
        // Drop samples containing non-finite entries at any horizon.
        let keep: Vec<usize> = (0..deltas[0].len())
            .filter(|&s| deltas.iter().all(|bucket| bucket[s].is_finite()))
            .collect();
        let cleaned: Vec<Vec<f64>> = deltas
            .iter()
            .map(|bucket| keep.iter().map(|&s| bucket[s]).collect())
            .collect();
        for i in 0..k_max {
            for j in i + 1..k_max {
                let r = correlation_or_unit(&cleaned[i], &cleaned[j]);
                agreement[i][j] = r;
                agreement[j][i] = r;
            }
        }
    }

    Ok(AmbiguityReport {
        ambiguity,
        ambiguity_eff,
        agreement,
        singleton_horizons: singletons,
    })
}

/// Assemble the full multiplicity report for one pool and evaluation
/// segment.
pub fn multiplicity_report(
    pool: &ModelPool,
    sets: &RashomonSets,
    eval: &Trajectory,
    p_k: &[f64],
    lambda_max: f64,
    warmup: usize,
    cap: usize,
) -> Result<MultiplicityReport> {
    let amb = ambiguity_and_agreement(pool, sets, eval, p_k, warmup, cap)?;
    let wr = lyapunov_weighted_ratio(sets, lambda_max, eval.dt());
    let classical_ratio = sets
        .members
        .iter()
        .map(|m| m.len() as f64 / sets.pool_size as f64)
        .sum::<f64>()
        / sets.k_max() as f64;
    Ok(MultiplicityReport {
        classical_ratio,
        rho_l: wr.rho_l,
        weights: wr.weights,
        ambiguity: amb.ambiguity,
        ambiguity_eff: amb.ambiguity_eff,
        agreement: amb.agreement,
        singleton_horizons: amb.singleton_horizons,
    })
}

/// Mean pairwise distance helper used by tests and examples: distance
/// between two constant forecasts c and -c is 2|c| before normalization.
pub(crate) fn mean_pairwise_distance(forecasts: &[Array3<f64>], k: usize) -> f64 {
    let (n_windows, _, d) = forecasts[0].dim();
    let mut acc = 0.0;
    let mut count = 0usize;
    for w in 0..n_windows {
        for a in 0..forecasts.len() {
            for b in a + 1..forecasts.len() {
                let mut dist2 = 0.0;
                for c in 0..d {
                    let diff = forecasts[a][[w, k, c]] - forecasts[b][[w, k, c]];
                    dist2 += diff * diff;
                }
                acc += dist2.sqrt();
                count += 1;
            }
        }
    }
    acc / count as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::TrajectorySource;
    use crate::reservoir::{enumerate_grid, train_pool, GridAxes, ReservoirConfig};

    fn toy_eval(t: usize, d: usize) -> Trajectory {
        let data = Array2::from_shape_fn((t, d), |(i, j)| ((i + 2 * j) as f64 * 0.11).sin());
        Trajectory::new(data, 0.5, TrajectorySource::External).unwrap()
    }

    fn tiny_pool(n_models: usize, train: &Trajectory, master_seed: u64) -> ModelPool {
        let axes = GridAxes {
            n_r: vec![12],
            rho: vec![0.8],
            sparsity_p: vec![0.6],
            leak_alpha: (0..n_models).map(|i| 0.4 + 0.1 * i as f64).collect(),
        };
        let base = ReservoirConfig {
            washout: 20,
            ..ReservoirConfig::default()
        };
        train_pool(&enumerate_grid(&axes, &base).unwrap(), train, master_seed).unwrap()
    }

    fn full_sets(pool_size: usize, k_max: usize) -> RashomonSets {
        RashomonSets {
            members: vec![(0..pool_size).collect(); k_max],
            eps: vec![1.0; k_max],
            l_star: vec![0.0; k_max],
            pool_size,
        }
    }

    #[test]
    fn identical_members_agree_perfectly() {
        // Two pool entries built from the same seed produce identical
        // forecasts: ambiguity 0 and an all-ones agreement matrix.
        let train = toy_eval(300, 2);
        let axes = GridAxes {
            n_r: vec![10],
            rho: vec![0.9],
            sparsity_p: vec![0.5],
            leak_alpha: vec![0.7, 0.7],
        };
        let base = ReservoirConfig {
            washout: 20,
            ..ReservoirConfig::default()
        };
        let mut configs = enumerate_grid(&axes, &base).unwrap();
        let pool = {
            // Same derived seed for both entries: train manually.
            configs[1] = configs[0].clone();
            let mut pool = train_pool(&configs, &train, 9).unwrap();
            // Force the second entry to be an exact copy of the first.
            pool.entries[1] = pool.entries[0].clone();
            pool
        };
        let eval = toy_eval(200, 2);
        let sets = full_sets(2, 4);
        let report =
            ambiguity_and_agreement(&pool, &sets, &eval, &[0.25; 4], 15, 0).unwrap();
        for a in &report.ambiguity {
            assert_eq!(*a, 0.0);
        }
        for row in &report.agreement {
            for v in row {
                assert_eq!(*v, 1.0);
            }
        }
    }

    #[test]
    fn constant_forecast_distance_is_twice_the_offset() {
        let c = 1.7;
        let shape = (6, 3, 2);
        let fa = Array3::from_elem(shape, c);
        let fb = Array3::from_elem(shape, -c);
        // Distance per window: sqrt(sum over 2 coords of (2c)^2) = 2c sqrt(2).
        let dist = mean_pairwise_distance(&[fa, fb], 1);
        assert!((dist - 2.0 * c * (2.0f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn singleton_sets_are_flagged_with_zero_ambiguity() {
        let train = toy_eval(300, 2);
        let pool = tiny_pool(3, &train, 4);
        let eval = toy_eval(200, 2);
        let sets = RashomonSets {
            members: vec![vec![0, 1, 2], vec![1], vec![0, 2]],
            eps: vec![0.1; 3],
            l_star: vec![0.0; 3],
            pool_size: 3,
        };
        let report = ambiguity_and_agreement(&pool, &sets, &eval, &[0.5, 0.25, 0.25], 15, 0).unwrap();
        assert_eq!(report.singleton_horizons, vec![2]);
        assert_eq!(report.ambiguity[1], 0.0);
        assert!(report.ambiguity[0] > 0.0);
        // Effective ambiguity is the p-weighted sum.
        let expect = 0.5 * report.ambiguity[0] + 0.25 * report.ambiguity[2];
        assert!((report.ambiguity_eff - expect).abs() < 1e-12);
    }

    #[test]
    fn agreement_matrix_is_symmetric_with_unit_diagonal() {
        let train = toy_eval(400, 2);
        let pool = tiny_pool(4, &train, 11);
        let eval = toy_eval(260, 2);
        let sets = full_sets(4, 5);
        let report =
            ambiguity_and_agreement(&pool, &sets, &eval, &[0.2; 5], 15, 0).unwrap();
        for i in 0..5 {
            assert_eq!(report.agreement[i][i], 1.0);
            for j in 0..5 {
                assert_eq!(report.agreement[i][j], report.agreement[j][i]);
                assert!(report.agreement[i][j].abs() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn report_combines_ratio_and_ambiguity() {
        let train = toy_eval(400, 2);
        let pool = tiny_pool(3, &train, 2);
        let eval = toy_eval(200, 2);
        let sets = RashomonSets {
            members: vec![vec![0, 1, 2], vec![0, 1], vec![0, 1]],
            eps: vec![0.1; 3],
            l_star: vec![0.0; 3],
            pool_size: 3,
        };
        let report = multiplicity_report(&pool, &sets, &eval, &[0.4, 0.3, 0.3], 0.5, 15, 0).unwrap();
        let expect_classical = (1.0 + 2.0 / 3.0 + 2.0 / 3.0) / 3.0;
        assert!((report.classical_ratio - expect_classical).abs() < 1e-12);
        assert!(report.rho_l > 0.0 && report.rho_l <= 1.0);
        assert!((report.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_p_k_is_rejected() {
        let train = toy_eval(300, 2);
        let pool = tiny_pool(2, &train, 3);
        let eval = toy_eval(200, 2);
        let sets = full_sets(2, 3);
        assert!(ambiguity_and_agreement(&pool, &sets, &eval, &[0.5, 0.5], 15, 0).is_err());
        assert!(ambiguity_and_agreement(&pool, &sets, &eval, &[0.5, 0.2, 0.2], 15, 0).is_err());
    }
}
