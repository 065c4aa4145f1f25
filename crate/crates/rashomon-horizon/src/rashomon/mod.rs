//! Horizon-constrained Rashomon sets and their multiplicity diagnostics.
//!
//! From a per-horizon loss table, an adaptive tolerance schedule
//! eps_k = alpha * Delta_k * (1 + beta * exp(gamma k)) defines the set of
//! models within eps_k of the best loss at each horizon. Chaos makes the
//! sets contract with horizon; the module fits that contraction rate,
//! computes the Lyapunov-weighted set-size ratio, and measures forecast
//! ambiguity and cross-horizon agreement among members.

mod losses;
mod multiplicity;

pub use losses::{
    eval_windows, evaluate_losses, losses_from_forecasts, model_forecasts, truth_tensor,
    EvalWindows, HorizonLossTable,
};
pub use multiplicity::{
    ambiguity_and_agreement, multiplicity_report, AmbiguityReport, MultiplicityReport,
};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Adaptive per-horizon tolerances.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// eps_k for horizons 1..=K.
    pub eps: Vec<f64>,
}

/// eps_k = alpha * Delta_k * (1 + beta * exp(gamma k)), with Delta_k the
/// range of the finite losses in column k.
pub fn epsilon_schedule(
    table: &HorizonLossTable,
    alpha: f64,
    beta: f64,
    gamma: f64,
) -> Result<EpsilonSchedule> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0,1), got {alpha}")));
    }
    if !(beta >= 0.0) || !(gamma >= 0.0) {
        return Err(Error::Config(format!(
            "beta and gamma must be non-negative, got beta={beta}, gamma={gamma}"
        )));
    }
    let mut eps = Vec::with_capacity(table.k_max());
    for k in 0..table.k_max() {
        let finite: Vec<f64> = table
            .losses
            .column(k)
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .collect();
        if finite.len() < 2 {
            return Err(Error::DegenerateColumn(k + 1));
        }
        let max = finite.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = finite.iter().cloned().fold(f64::INFINITY, f64::min);
        let delta = max - min;
        let horizon = (k + 1) as f64;
        eps.push(alpha * delta * (1.0 + beta * (gamma * horizon).exp()));
    }
    Ok(EpsilonSchedule {
        alpha,
        beta,
        gamma,
        eps,
    })
}

/// Per-horizon member sets under a tolerance schedule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RashomonSets {
    /// Sorted model indices per horizon (index 0 = horizon 1).
    pub members: Vec<Vec<usize>>,
    pub eps: Vec<f64>,
    /// Best finite loss per horizon.
    pub l_star: Vec<f64>,
    pub pool_size: usize,
}

impl RashomonSets {
    pub fn k_max(&self) -> usize {
        self.members.len()
    }

    /// Models that belong to the set at every horizon.
    pub fn intersection(&self) -> Vec<usize> {
        let mut common: Option<Vec<usize>> = None;
        for members in &self.members {
            common = Some(match common {
                None => members.clone(),
                Some(prev) => prev
                    .into_iter()
                    .filter(|h| members.binary_search(h).is_ok())
                    .collect(),
            });
        }
        common.unwrap_or_default()
    }
}

/// Membership by threshold: h is in the horizon-k set iff its loss is
/// finite and within eps_k of the best loss (ties at the boundary
/// included). The column argmin is always a member.
pub fn build_sets(table: &HorizonLossTable, schedule: &EpsilonSchedule) -> Result<RashomonSets> {
    if schedule.eps.len() != table.k_max() {
        return Err(Error::Shape(format!(
            "schedule has {} horizons, table has {}",
            schedule.eps.len(),
            table.k_max()
        )));
    }
    let mut members = Vec::with_capacity(table.k_max());
    let mut l_star = Vec::with_capacity(table.k_max());
    for k in 0..table.k_max() {
        let column = table.losses.column(k);
        let best = column
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(f64::INFINITY, f64::min);
        if !best.is_finite() {
            return Err(Error::DegenerateColumn(k + 1));
        }
        let cut = best + schedule.eps[k];
        let set: Vec<usize> = column
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite() && **v <= cut)
            .map(|(h, _)| h)
            .collect();
        members.push(set);
        l_star.push(best);
    }
    Ok(RashomonSets {
        members,
        eps: schedule.eps.clone(),
        l_star,
        pool_size: table.n_models(),
    })
}

/// Documented calibration grid.
pub const CALIBRATION_ALPHAS: [f64; 5] = [0.02, 0.05, 0.1, 0.2, 0.4];
pub const CALIBRATION_BETAS: [f64; 5] = [0.0, 0.25, 0.5, 1.0, 2.0];
pub const CALIBRATION_GAMMAS: [f64; 4] = [0.0, 0.05, 0.1, 0.2];

/// A calibrated schedule plus how well the band was met.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationOutcome {
    pub schedule: EpsilonSchedule,
    /// Horizons whose set size falls outside the band.
    pub horizons_outside: usize,
    pub feasible: bool,
}

/// Grid-search (alpha, beta, gamma) to keep every horizon's set size inside
/// `band`, minimizing the number of violating horizons; ties prefer smaller
/// alpha, then smaller beta, then smaller gamma. An infeasible band returns
/// the best-effort schedule with `feasible = false`.
pub fn calibrate_schedule(
    table: &HorizonLossTable,
    band: (usize, usize),
) -> Result<CalibrationOutcome> {
    let (lo, hi) = band;
    if lo > hi || lo == 0 {
        return Err(Error::Config(format!("band [{lo}, {hi}] is not a valid size range")));
    }
    if table.n_models() < lo {
        return Err(Error::Config(format!(
            "pool of {} models cannot meet a band starting at {lo}",
            table.n_models()
        )));
    }
    let mut best: Option<(usize, EpsilonSchedule)> = None;
    for &alpha in &CALIBRATION_ALPHAS {
        for &beta in &CALIBRATION_BETAS {
            for &gamma in &CALIBRATION_GAMMAS {
                let schedule = epsilon_schedule(table, alpha, beta, gamma)?;
                let sets = build_sets(table, &schedule)?;
                let outside = sets
                    .members
                    .iter()
                    .filter(|m| m.len() < lo || m.len() > hi)
                    .count();
                if best.as_ref().is_none_or(|(b, _)| outside < *b) {
                    best = Some((outside, schedule));
                    if outside == 0 {
                        // Grid order already encodes the tie-break.
                        let (outside, schedule) = best.unwrap();
                        return Ok(CalibrationOutcome {
                            schedule,
                            horizons_outside: outside,
                            feasible: true,
                        });
                    }
                }
            }
        }
    }
    let (outside, schedule) = best.unwrap();
    Ok(CalibrationOutcome {
        schedule,
        horizons_outside: outside,
        feasible: outside == 0,
    })
}

/// Exponential-contraction fit of set sizes against horizon.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContractionFit {
    /// Decay rate per horizon step (negated slope of log size vs k).
    pub rate: f64,
    pub r2: f64,
    /// Horizons (1-based) entering the fit.
    pub horizons_used: Vec<usize>,
}

/// Least-squares fit of log |members(k)| against k over horizons with at
/// least 2 members. Needs at least 4 usable horizons.
pub fn fit_contraction(sets: &RashomonSets) -> Result<ContractionFit> {
    let usable: Vec<(usize, f64)> = sets
        .members
        .iter()
        .enumerate()
        .filter(|(_, m)| m.len() >= 2)
        .map(|(k, m)| (k + 1, (m.len() as f64).ln()))
        .collect();
    if usable.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "only {} horizons have at least 2 members; need 4 for a contraction fit",
            usable.len()
        )));
    }
    let n = usable.len() as f64;
    let x_mean = usable.iter().map(|(k, _)| *k as f64).sum::<f64>() / n;
    let y_mean = usable.iter().map(|(_, y)| *y).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (k, y) in &usable {
        let dx = *k as f64 - x_mean;
        let dy = y - y_mean;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 {
        (sxy * sxy) / (sxx * syy)
    } else {
        // A constant log-size sequence is fit exactly by a flat line.
        1.0
    };
    Ok(ContractionFit {
        rate: -slope,
        r2,
        horizons_used: usable.into_iter().map(|(k, _)| k).collect(),
    })
}

/// Normalized-size ratio with exponentially decaying horizon weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightedRatio {
    pub rho_l: f64,
    /// w_k = exp(-lambda k dt) / Z, summing to 1.
    pub weights: Vec<f64>,
}

/// rho_L = sum_k w_k |members(k)| / |H| with w_k = exp(-lambda k dt)/Z.
/// The weights absorb the normalization, so rho_L is a convex combination
/// of per-horizon ratios and lies in [0, 1].
pub fn lyapunov_weighted_ratio(sets: &RashomonSets, lambda_max: f64, dt: f64) -> WeightedRatio {
    let k_max = sets.k_max();
    let mut weights: Vec<f64> = (1..=k_max)
        .map(|k| (-lambda_max * k as f64 * dt).exp())
        .collect();
    let z: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= z);
    let rho_l = weights
        .iter()
        .zip(&sets.members)
        .map(|(w, m)| w * m.len() as f64 / sets.pool_size as f64)
        .sum();
    WeightedRatio { rho_l, weights }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn table_from(rows: Vec<Vec<f64>>) -> HorizonLossTable {
        let k = rows[0].len();
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        HorizonLossTable {
            losses: Array2::from_shape_vec((rows.len(), k), flat).unwrap(),
            n_eval: 10,
        }
    }

    #[test]
    fn schedule_reductions() {
        let table = table_from(vec![vec![1.0, 2.0], vec![3.0, 5.0], vec![2.0, 3.0]]);
        // beta = 0 -> eps_k = alpha * Delta_k.
        let s = epsilon_schedule(&table, 0.5, 0.0, 0.7).unwrap();
        assert_eq!(s.eps, vec![1.0, 1.5]);
        // gamma = 0 -> constant multiple (1 + beta).
        let s = epsilon_schedule(&table, 0.5, 1.0, 0.0).unwrap();
        assert_eq!(s.eps, vec![2.0, 3.0]);
    }

    #[test]
    fn schedule_matches_direct_arithmetic() {
        // alpha=0.1, beta=0.5, gamma=0.1, Delta_3=2:
        // eps_3 = 0.1 * 2 * (1 + 0.5 e^{0.3}) = 0.334985881...
        let table = table_from(vec![vec![0.0, 0.0, 1.0], vec![1.0, 1.0, 3.0]]);
        let s = epsilon_schedule(&table, 0.1, 0.5, 0.1).unwrap();
        let expect = 0.1 * 2.0 * (1.0 + 0.5 * (0.3f64).exp());
        assert!((s.eps[2] - expect).abs() < 1e-15);
        assert!((expect - 0.334_985_881).abs() < 1e-9);
    }

    #[test]
    fn degenerate_columns_are_rejected() {
        let table = table_from(vec![
            vec![1.0, f64::INFINITY],
            vec![2.0, f64::INFINITY],
        ]);
        match epsilon_schedule(&table, 0.1, 0.0, 0.0) {
            Err(crate::error::Error::DegenerateColumn(k)) => assert_eq!(k, 2),
            other => panic!("expected degenerate column, got {other:?}"),
        }
    }

    #[test]
    fn membership_by_threshold() {
        let table = table_from(vec![vec![1.0], vec![1.2], vec![2.0]]);
        let schedule = EpsilonSchedule {
            alpha: 0.3,
            beta: 0.0,
            gamma: 0.0,
            eps: vec![0.3],
        };
        let sets = build_sets(&table, &schedule).unwrap();
        assert_eq!(sets.members[0], vec![0, 1]);
        assert_eq!(sets.l_star[0], 1.0);
    }

    #[test]
    fn infinite_eps_admits_finite_losses_only() {
        let table = table_from(vec![vec![1.0], vec![f64::INFINITY], vec![5.0]]);
        let schedule = EpsilonSchedule {
            alpha: 0.5,
            beta: 0.0,
            gamma: 0.0,
            eps: vec![f64::INFINITY],
        };
        let sets = build_sets(&table, &schedule).unwrap();
        assert_eq!(sets.members[0], vec![0, 2]);
    }

    #[test]
    fn zero_eps_keeps_the_argmin_set() {
        let table = table_from(vec![vec![2.0], vec![1.0], vec![1.0]]);
        let schedule = EpsilonSchedule {
            alpha: 0.5,
            beta: 0.0,
            gamma: 0.0,
            eps: vec![0.0],
        };
        let sets = build_sets(&table, &schedule).unwrap();
        assert_eq!(sets.members[0], vec![1, 2]);
    }

    #[test]
    fn affine_shift_of_a_column_keeps_membership() {
        let base = table_from(vec![
            vec![1.0, 2.0],
            vec![1.4, 2.3],
            vec![3.0, 2.05],
            vec![1.1, 9.0],
        ]);
        let shifted = {
            let mut t = base.clone();
            t.losses.column_mut(1).iter_mut().for_each(|v| *v += 7.5);
            t
        };
        let s1 = epsilon_schedule(&base, 0.2, 0.5, 0.1).unwrap();
        let s2 = epsilon_schedule(&shifted, 0.2, 0.5, 0.1).unwrap();
        assert_eq!(s1.eps, s2.eps);
        let m1 = build_sets(&base, &s1).unwrap();
        let m2 = build_sets(&shifted, &s2).unwrap();
        assert_eq!(m1.members, m2.members);
    }

    #[test]
    fn trivial_band_returns_smallest_alpha() {
        let table = table_from(vec![
            vec![1.0, 1.0],
            vec![1.5, 4.0],
            vec![2.0, 9.0],
            vec![2.5, 16.0],
        ]);
        let outcome = calibrate_schedule(&table, (1, 4)).unwrap();
        assert!(outcome.feasible);
        assert_eq!(outcome.schedule.alpha, CALIBRATION_ALPHAS[0]);
        assert_eq!(outcome.schedule.beta, CALIBRATION_BETAS[0]);
    }

    #[test]
    fn infeasible_band_reports_gap() {
        let table = table_from(vec![vec![1.0], vec![2.0]]);
        assert!(calibrate_schedule(&table, (3, 10)).is_err());
        // Upper bound below the achievable minimum set size: every schedule
        // keeps both models in band or out, so the search still resolves.
        let outcome = calibrate_schedule(&table, (2, 2)).unwrap();
        assert!(outcome.horizons_outside <= 1);
    }

    #[test]
    fn contraction_recovers_synthetic_rate() {
        // Sizes 100 e^{-0.5 k}, rounded, for as long as at least 2 remain.
        let mut members = Vec::new();
        for k in 1..=9 {
            let size = (100.0 * (-0.5 * k as f64).exp()).round() as usize;
            members.push((0..size.max(1)).collect::<Vec<_>>());
        }
        let sets = RashomonSets {
            eps: vec![0.0; members.len()],
            l_star: vec![0.0; members.len()],
            pool_size: 100,
            members,
        };
        let fit = fit_contraction(&sets).unwrap();
        assert!((fit.rate - 0.5).abs() < 0.02, "rate {}", fit.rate);
        assert!(fit.r2 > 0.99, "r2 {}", fit.r2);
    }

    #[test]
    fn constant_sizes_give_zero_rate() {
        let sets = RashomonSets {
            members: vec![vec![0, 1, 2]; 6],
            eps: vec![0.0; 6],
            l_star: vec![0.0; 6],
            pool_size: 5,
        };
        let fit = fit_contraction(&sets).unwrap();
        assert!(fit.rate.abs() < 1e-9);
    }

    #[test]
    fn too_few_usable_horizons_is_an_error() {
        let sets = RashomonSets {
            members: vec![vec![0, 1], vec![0], vec![0], vec![0, 1], vec![0]],
            eps: vec![0.0; 5],
            l_star: vec![0.0; 5],
            pool_size: 2,
        };
        assert!(fit_contraction(&sets).is_err());
    }

    #[test]
    fn weighted_ratio_hand_case() {
        // K=2, dt=1, lambda=ln 2, sizes (8, 4) of 10: weights (2/3, 1/3),
        // rho = 2/3*0.8 + 1/3*0.4 = 0.6667.
        let sets = RashomonSets {
            members: vec![(0..8).collect(), (0..4).collect()],
            eps: vec![0.0; 2],
            l_star: vec![0.0; 2],
            pool_size: 10,
        };
        let wr = lyapunov_weighted_ratio(&sets, std::f64::consts::LN_2, 1.0);
        assert!((wr.weights[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((wr.rho_l - 2.0 / 3.0 * 0.8 - 1.0 / 3.0 * 0.4).abs() < 1e-12);
    }

    #[test]
    fn zero_lambda_reduces_to_plain_mean() {
        let sets = RashomonSets {
            members: vec![(0..6).collect(), (0..3).collect(), (0..2).collect()],
            eps: vec![0.0; 3],
            l_star: vec![0.0; 3],
            pool_size: 6,
        };
        let wr = lyapunov_weighted_ratio(&sets, 0.0, 0.25);
        let mean = (1.0 + 0.5 + 2.0 / 6.0) / 3.0;
        assert!((wr.rho_l - mean).abs() < 1e-12);
        assert!((wr.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn full_sets_give_unit_ratio_for_any_lambda() {
        let sets = RashomonSets {
            members: vec![(0..7).collect(); 5],
            eps: vec![0.0; 5],
            l_star: vec![0.0; 5],
            pool_size: 7,
        };
        for lambda in [0.0, 0.3, 1.7, 12.0] {
            let wr = lyapunov_weighted_ratio(&sets, lambda, 0.05);
            assert!((wr.rho_l - 1.0).abs() < 1e-12, "lambda {lambda}");
        }
    }

    #[test]
    fn intersection_is_the_common_membership() {
        let sets = RashomonSets {
            members: vec![vec![0, 1, 2, 4], vec![1, 2, 4], vec![1, 4, 5]],
            eps: vec![0.0; 3],
            l_star: vec![0.0; 3],
            pool_size: 6,
        };
        assert_eq!(sets.intersection(), vec![1, 4]);
    }
}
