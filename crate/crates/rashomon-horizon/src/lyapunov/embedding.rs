//! Delay-coordinate reconstruction and its parameter selectors.
//!
//! The delay comes from the first strict local minimum of mutual
//! information (rank-based Gaussian-copula estimator); the dimension from
//! Kennel-style false nearest neighbors.

use crate::error::{Error, Result};
use ndarray::{Array2, ArrayView2};

fn check_not_constant(series: &[f64]) -> Result<()> {
    let min = series.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = series.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return Err(Error::DegenerateSeries(
            "series has no variation; cannot select embedding parameters".into(),
        ));
    }
    Ok(())
}

/// Midranks of the series (ties share their average rank).
fn midranks(series: &[f64]) -> Vec<f64> {
    let n = series.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| series[a].total_cmp(&series[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && series[order[j + 1]] == series[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Mutual information (nats) of (x_t, x_{t+tau}) for tau = 0..=tau_max.
///
/// Rank-based Gaussian-copula estimate: I(tau) = -0.5 ln(1 - rho^2) with
/// rho the rank correlation at lag tau. Histogram estimators saturate at
/// the bin resolution on noise-free deterministic signals and develop
/// spurious extrema; the copula estimate stays smooth in tau.
pub fn mutual_information_profile(series: &[f64], tau_max: usize) -> Result<Vec<f64>> {
    check_not_constant(series)?;
    let t = series.len();
    if t < 10 * tau_max.max(1) {
        return Err(Error::InsufficientData(format!(
            "series length {t} is below 10 * tau_max = {}",
            10 * tau_max
        )));
    }
    let ranks = midranks(series);
    let mut profile = Vec::with_capacity(tau_max + 1);
    for tau in 0..=tau_max {
        let pairs = t - tau;
        let n = pairs as f64;
        let mean_a = ranks[..pairs].iter().sum::<f64>() / n;
        let mean_b = ranks[tau..].iter().sum::<f64>() / n;
        let (mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0);
        for i in 0..pairs {
            let da = ranks[i] - mean_a;
            let db = ranks[i + tau] - mean_b;
            saa += da * da;
            sbb += db * db;
            sab += da * db;
        }
        if saa == 0.0 || sbb == 0.0 {
            return Err(Error::DegenerateSeries(
                "rank variance vanished while estimating mutual information".into(),
            ));
        }
        let rho2 = (sab * sab / (saa * sbb)).min(1.0 - 1e-9);
        profile.push(-0.5 * (1.0 - rho2).ln());
    }
    Ok(profile)
}

/// Outcome of the delay search.
#[derive(Debug, Clone)]
pub struct DelaySelection {
    pub tau: usize,
    /// False when no strict local minimum existed (already-decorrelated
    /// series, or a monotone profile resolved by the global minimizer).
    pub strict_minimum: bool,
    pub profile: Vec<f64>,
}

/// Smallest tau >= 1 at which I(tau) is a strict local minimum; falls back
/// to the global minimizer when none exists up to tau_max.
///
/// Map-like data decorrelates within a single step: the profile is then
/// sampling noise at every lag and any "minimum" in it is meaningless, so
/// when I(1) sits below the estimator's noise floor the delay is 1.
pub fn mutual_information_delay(series: &[f64], tau_max: usize) -> Result<DelaySelection> {
    if tau_max < 2 {
        return Err(Error::Config(format!("tau_max must be at least 2, got {tau_max}")));
    }
    let profile = mutual_information_profile(series, tau_max)?;
    // Under independence rho^2 ~ chi2(1)/n, so I ~ 1/(2n); 4/n clears it.
    let noise_floor = 4.0 / (series.len() - 1) as f64;
    if profile[1] < noise_floor {
        return Ok(DelaySelection {
            tau: 1,
            strict_minimum: false,
            profile,
        });
    }
    for tau in 1..tau_max {
        if profile[tau] < profile[tau - 1] && profile[tau] < profile[tau + 1] {
            return Ok(DelaySelection {
                tau,
                strict_minimum: true,
                profile,
            });
        }
    }
    let tau = (1..=tau_max)
        .min_by(|&a, &b| profile[a].total_cmp(&profile[b]))
        .unwrap();
    Ok(DelaySelection {
        tau,
        strict_minimum: false,
        profile,
    })
}

const FNN_DISTANCE_RATIO: f64 = 10.0;
const FNN_ATTRACTOR_SIGMA: f64 = 2.0;
const FNN_ACCEPT_FRACTION: f64 = 0.01;
const FNN_MAX_REFS: usize = 500;

/// Smallest embedding dimension at which the false-neighbor fraction drops
/// below 1%; m_max if it never does. Works on vector-valued states: each
/// delay block contributes d coordinates.
pub fn false_nearest_neighbors_multi(
    data: ArrayView2<f64>,
    tau: usize,
    m_max: usize,
) -> Result<usize> {
    let flat: Vec<f64> = data.iter().copied().collect();
    check_not_constant(&flat)?;
    if tau < 1 || m_max < 1 {
        return Err(Error::Config("tau and m_max must be at least 1".into()));
    }
    let t = data.nrows();
    let d = data.ncols();
    if t < m_max * tau + 10 {
        return Err(Error::InsufficientData(format!(
            "series length {t} too short for embeddings up to m_max = {m_max} at tau = {tau}"
        )));
    }
    // Attractor scale: rms distance from the mean state.
    let mean: Vec<f64> = (0..d)
        .map(|c| data.column(c).sum() / t as f64)
        .collect();
    let sigma = (data
        .rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .zip(&mean)
                .map(|(x, m)| (x - m) * (x - m))
                .sum::<f64>()
        })
        .sum::<f64>()
        / t as f64)
        .sqrt();

    let block_dist2 = |a: usize, b: usize, blocks: usize| -> f64 {
        let mut acc = 0.0;
        for l in 0..blocks {
            for c in 0..d {
                let diff = data[[a + l * tau, c]] - data[[b + l * tau, c]];
                acc += diff * diff;
            }
        }
        acc
    };

    for m in 1..=m_max {
        // Points that still exist in the (m+1)-block embedding.
        let count = t - m * tau;
        let stride = (count / FNN_MAX_REFS).max(1);
        let mut examined = 0usize;
        let mut false_count = 0usize;

        let mut ref_idx = 0;
        while ref_idx < count {
            let mut best = f64::INFINITY;
            let mut nn = None;
            for c in 0..count {
                if c == ref_idx {
                    continue;
                }
                let d2 = block_dist2(ref_idx, c, m);
                if d2 > 0.0 && d2 < best {
                    best = d2;
                    nn = Some(c);
                }
            }
            if let Some(c) = nn {
                let d_m = best.sqrt();
                let extra2 = {
                    let mut acc = 0.0;
                    for k in 0..d {
                        let diff = data[[ref_idx + m * tau, k]] - data[[c + m * tau, k]];
                        acc += diff * diff;
                    }
                    acc
                };
                let d_m1 = (best + extra2).sqrt();
                // A pair at roundoff distance even with the extra block is a
                // recurrence of the same state (exactly periodic data), not
                // a projection artifact.
                let recurrence = d_m1 <= 1e-10 * sigma;
                let is_false = !recurrence
                    && (extra2.sqrt() / d_m > FNN_DISTANCE_RATIO
                        || d_m1 / sigma > FNN_ATTRACTOR_SIGMA);
                examined += 1;
                if is_false {
                    false_count += 1;
                }
            }
            ref_idx += stride;
        }
        if examined > 0 && (false_count as f64 / examined as f64) < FNN_ACCEPT_FRACTION {
            return Ok(m);
        }
    }
    Ok(m_max)
}

/// Scalar-series false nearest neighbors.
pub fn false_nearest_neighbors(series: &[f64], tau: usize, m_max: usize) -> Result<usize> {
    let view = ArrayView2::from_shape((series.len(), 1), series)
        .map_err(|e| Error::Shape(e.to_string()))?;
    false_nearest_neighbors_multi(view, tau, m_max)
}

/// Delay embedding of vector-valued states: N = T - (m-1) tau points, point
/// i concatenating the d-dimensional states x_i, x_{i+tau}, ...,
/// x_{i+(m-1) tau} into R^(m d).
pub fn embed_trajectory(data: ArrayView2<f64>, m: usize, tau: usize) -> Result<Array2<f64>> {
    if m < 1 || tau < 1 {
        return Err(Error::Config("embedding needs m >= 1 and tau >= 1".into()));
    }
    let t = data.nrows();
    let d = data.ncols();
    if t <= (m - 1) * tau {
        return Err(Error::Shape(format!(
            "series length {t} too short for m = {m}, tau = {tau}"
        )));
    }
    let n = t - (m - 1) * tau;
    Ok(Array2::from_shape_fn((n, m * d), |(i, col)| {
        data[[i + (col / d) * tau, col % d]]
    }))
}

/// Delay embedding of a scalar series into R^m.
pub fn embed(series: &[f64], m: usize, tau: usize) -> Result<Array2<f64>> {
    let view = ArrayView2::from_shape((series.len(), 1), series)
        .map_err(|e| Error::Shape(e.to_string()))?;
    embed_trajectory(view, m, tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sine(n: usize, period: f64) -> Vec<f64> {
        (0..n)
            .map(|t| (2.0 * std::f64::consts::PI * t as f64 / period).sin())
            .collect()
    }

    fn logistic(n: usize, x0: f64) -> Vec<f64> {
        let mut x = x0;
        (0..n)
            .map(|_| {
                x = 4.0 * x * (1.0 - x);
                x
            })
            .collect()
    }

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random::<f64>() - 0.5).collect()
    }

    /// Independent dependence sweep: |Pearson correlation| at each lag,
    /// computed directly on the raw values.
    fn abs_lag_correlation(series: &[f64], tau: usize) -> f64 {
        let pairs = series.len() - tau;
        let n = pairs as f64;
        let ma = series[..pairs].iter().sum::<f64>() / n;
        let mb = series[tau..].iter().sum::<f64>() / n;
        let (mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0);
        for i in 0..pairs {
            let (da, db) = (series[i] - ma, series[i + tau] - mb);
            saa += da * da;
            sbb += db * db;
            sab += da * db;
        }
        (sab / (saa * sbb).sqrt()).abs()
    }

    #[test]
    fn sine_delay_is_quarter_period() {
        let series = sine(1000, 100.0);
        let sel = mutual_information_delay(&series, 60).unwrap();
        assert!(
            (sel.tau as i64 - 25).unsigned_abs() <= 3,
            "tau = {}",
            sel.tau
        );
        // Independent sweep: dependence measured directly as the absolute
        // lag correlation of the raw values reaches its first minimum at the
        // quarter period too.
        let sweep: Vec<f64> = (1..=60).map(|t| abs_lag_correlation(&series, t)).collect();
        let mut first_min = None;
        for t in 1..sweep.len() - 1 {
            if sweep[t] < sweep[t - 1] && sweep[t] < sweep[t + 1] {
                first_min = Some(t + 1);
                break;
            }
        }
        let independent = first_min.unwrap();
        assert!(
            (independent as i64 - 25).unsigned_abs() <= 3,
            "independent first minimum at {independent}"
        );
    }

    #[test]
    fn noise_returns_selection_consistent_with_its_profile() {
        let series = noise(5000, 4);
        let sel = mutual_information_delay(&series, 40).unwrap();
        assert!(!sel.profile.iter().any(|v| !v.is_finite()));
        // Replicate the selection rule on the returned profile: sub-floor
        // first-lag dependence short-circuits to tau = 1, otherwise first
        // strict local minimum, otherwise global minimizer.
        let expected = if sel.profile[1] < 4.0 / (series.len() - 1) as f64 {
            (1, false)
        } else {
            let mut found = None;
            for t in 1..40 {
                if sel.profile[t] < sel.profile[t - 1] && sel.profile[t] < sel.profile[t + 1] {
                    found = Some((t, true));
                    break;
                }
            }
            found.unwrap_or_else(|| {
                let t = (1..=40)
                    .min_by(|&a, &b| sel.profile[a].total_cmp(&sel.profile[b]))
                    .unwrap();
                (t, false)
            })
        };
        assert_eq!((sel.tau, sel.strict_minimum), expected);
    }

    #[test]
    fn monotone_profile_falls_back_to_global_minimizer() {
        // A linear ramp stays perfectly rank-correlated at every lag: the
        // profile has no interior strict minimum, exercising the fallback.
        let series: Vec<f64> = (0..2000).map(|t| t as f64).collect();
        let sel = mutual_information_delay(&series, 30).unwrap();
        assert!(!sel.strict_minimum);
        let global = (1..=30)
            .min_by(|&a, &b| sel.profile[a].total_cmp(&sel.profile[b]))
            .unwrap();
        assert_eq!(sel.tau, global);
    }

    #[test]
    fn constant_series_is_degenerate() {
        let series = vec![3.5; 500];
        assert!(matches!(
            mutual_information_delay(&series, 10),
            Err(Error::DegenerateSeries(_))
        ));
        assert!(matches!(
            false_nearest_neighbors(&series, 1, 5),
            Err(Error::DegenerateSeries(_))
        ));
    }

    #[test]
    fn fnn_logistic_map_needs_small_dimension() {
        let series = logistic(4000, 0.4);
        let m = false_nearest_neighbors(&series, 1, 8).unwrap();
        assert!(m <= 3, "m = {m}");
    }

    #[test]
    fn fnn_sine_unfolds_at_two() {
        let series = sine(3000, 100.0);
        let m = false_nearest_neighbors(&series, 25, 8).unwrap();
        assert!(m <= 2, "m = {m}");
        assert!(m >= 2, "a 1-d projection of a loop cannot unfold, got m = {m}");
    }

    #[test]
    fn fnn_white_noise_never_settles() {
        let series = noise(3000, 9);
        let m = false_nearest_neighbors(&series, 1, 6).unwrap();
        assert_eq!(m, 6);
    }

    #[test]
    fn embed_identity_at_m1() {
        let series = vec![1.0, 2.0, 3.0, 4.0];
        let pts = embed(&series, 1, 3).unwrap();
        assert_eq!(pts.shape(), &[4, 1]);
        assert_eq!(pts.column(0).to_vec(), series);
    }

    #[test]
    fn embed_matches_hand_construction() {
        let series = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let pts = embed(&series, 2, 2).unwrap();
        assert_eq!(pts.shape(), &[3, 2]);
        assert_eq!(pts.row(0).to_vec(), vec![1.0, 3.0]);
        assert_eq!(pts.row(1).to_vec(), vec![2.0, 4.0]);
        assert_eq!(pts.row(2).to_vec(), vec![3.0, 5.0]);
    }

    #[test]
    fn embed_point_count() {
        let series: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let pts = embed(&series, 3, 1).unwrap();
        assert_eq!(pts.nrows(), 8);
        assert!(embed(&series[..3], 4, 1).is_err());
    }
}
