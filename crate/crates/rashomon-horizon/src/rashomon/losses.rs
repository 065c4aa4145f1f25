//! Per-model, per-horizon forecast losses over shared evaluation windows.
//!
//! Windows are anchored at stride `k_max`, so forecast targets never
//! overlap. The reservoir is driven teacher-forced through the evaluation
//! segment once per model; at each anchor the state is snapshotted and
//! rolled out autonomously for every horizon. Later windows therefore get
//! the entire preceding segment as warmup.

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::reservoir::ModelPool;
use ndarray::{Array2, Array3};
use rayon::prelude::*;

/// Shared forecast origins within an evaluation segment.
#[derive(Debug, Clone)]
pub struct EvalWindows {
    /// Index of the last teacher-forced row of each window; the horizon-k
    /// target is the row `anchor + k`.
    pub anchors: Vec<usize>,
    pub k_max: usize,
}

/// Anchor layout for a segment of `t_eval` rows: the first anchor sits after
/// `warmup` rows, subsequent anchors advance by `k_max`. At least 10 windows
/// must fit; at most `cap` are used.
pub fn eval_windows(t_eval: usize, k_max: usize, warmup: usize, cap: usize) -> Result<EvalWindows> {
    if k_max < 1 {
        return Err(Error::Config("k_max must be at least 1".into()));
    }
    if warmup < 1 {
        return Err(Error::Config("warmup must be at least 1".into()));
    }
    let mut anchors = Vec::new();
    let mut anchor = warmup - 1;
    while anchor + k_max < t_eval && (cap == 0 || anchors.len() < cap) {
        anchors.push(anchor);
        anchor += k_max;
    }
    if anchors.len() < 10 {
        return Err(Error::Config(format!(
            "evaluation segment of {t_eval} rows supports only {} windows at horizon {k_max} \
             (warmup {warmup}); at least 10 are required",
            anchors.len()
        )));
    }
    Ok(EvalWindows { anchors, k_max })
}

/// True future states per (window, horizon): shape (windows, k_max, d).
/// Tensor index k holds the horizon k+1 target, the row `anchor + k + 1`.
pub fn truth_tensor(eval: &Trajectory, windows: &EvalWindows) -> Array3<f64> {
    let data = eval.data();
    Array3::from_shape_fn(
        (windows.anchors.len(), windows.k_max, eval.dim()),
        |(w, k, c)| data[[windows.anchors[w] + k + 1, c]],
    )
}

/// Closed-loop forecasts of one model on the shared windows: shape
/// (windows, k_max, d); NaN marks a diverged rollout.
pub fn model_forecasts(
    model: &crate::reservoir::ReservoirModel,
    eval: &Trajectory,
    windows: &EvalWindows,
) -> Result<Array3<f64>> {
    let data = eval.data();
    let d = eval.dim();
    let mut out = Array3::from_elem((windows.anchors.len(), windows.k_max, d), f64::NAN);
    let mut state = model.initial_state();
    let mut row = 0usize;
    for (w, &anchor) in windows.anchors.iter().enumerate() {
        model.drive(&mut state, data.slice(ndarray::s![row..=anchor, ..]))?;
        row = anchor + 1;
        let rolled = model.rollout_from(&state, windows.k_max)?;
        out.index_axis_mut(ndarray::Axis(0), w).assign(&rolled);
    }
    Ok(out)
}

/// Mean squared forecast errors per (model, horizon).
#[derive(Debug, Clone)]
pub struct HorizonLossTable {
    /// |H| x K matrix; +inf marks diverged rollouts.
    pub losses: Array2<f64>,
    /// Evaluation windows behind every cell.
    pub n_eval: usize,
}

impl HorizonLossTable {
    pub fn n_models(&self) -> usize {
        self.losses.nrows()
    }

    pub fn k_max(&self) -> usize {
        self.losses.ncols()
    }
}

/// Reduce forecasts against truths: cell (h, k) is the mean over windows of
/// the squared Euclidean error; a non-finite forecast makes the cell +inf.
/// This is the composition point the loss pipeline and its tests share.
pub fn losses_from_forecasts(
    forecasts: &[Array3<f64>],
    truths: &Array3<f64>,
) -> Result<HorizonLossTable> {
    let (n_windows, k_max, d) = truths.dim();
    let mut losses = Array2::zeros((forecasts.len(), k_max));
    for (h, fc) in forecasts.iter().enumerate() {
        if fc.dim() != (n_windows, k_max, d) {
            return Err(Error::Shape(format!(
                "forecast tensor {h} has shape {:?}, truths have {:?}",
                fc.dim(),
                truths.dim()
            )));
        }
        for k in 0..k_max {
            let mut acc = 0.0;
            for w in 0..n_windows {
                let mut err = 0.0;
                for c in 0..d {
                    let diff = fc[[w, k, c]] - truths[[w, k, c]];
                    err += diff * diff;
                }
                acc += err;
            }
            let mean = acc / n_windows as f64;
            losses[[h, k]] = if mean.is_finite() { mean } else { f64::INFINITY };
        }
    }
    Ok(HorizonLossTable {
        losses,
        n_eval: n_windows,
    })
}

/// Evaluate the whole pool on an evaluation segment. Failed pool entries
/// contribute +inf rows. Models evaluate in parallel; each loss row is
/// reduced in fixed window order.
pub fn evaluate_losses(
    pool: &ModelPool,
    eval: &Trajectory,
    k_max: usize,
    warmup: usize,
    cap: usize,
) -> Result<HorizonLossTable> {
    let windows = eval_windows(eval.steps(), k_max, warmup, cap)?;
    let truths = truth_tensor(eval, &windows);
    let rows: Vec<Result<Vec<f64>>> = pool
        .entries
        .par_iter()
        .map(|entry| match entry.model() {
            None => Ok(vec![f64::INFINITY; k_max]),
            Some(model) => {
                let fc = model_forecasts(model, eval, &windows)?;
                let table = losses_from_forecasts(std::slice::from_ref(&fc), &truths)?;
                Ok(table.losses.row(0).to_vec())
            }
        })
        .collect();
    let mut losses = Array2::zeros((pool.len(), k_max));
    for (h, row) in rows.into_iter().enumerate() {
        let row = row?;
        losses.row_mut(h).assign(&ndarray::Array1::from_vec(row));
    }
    Ok(HorizonLossTable {
        losses,
        n_eval: windows.anchors.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::TrajectorySource;

    fn toy_eval(t: usize, d: usize) -> Trajectory {
        let data = Array2::from_shape_fn((t, d), |(i, j)| ((i * (j + 1)) as f64 * 0.05).sin());
        Trajectory::new(data, 0.1, TrajectorySource::External).unwrap()
    }

    #[test]
    fn anchors_stride_by_k_and_respect_warmup() {
        let w = eval_windows(500, 20, 20, 0).unwrap();
        assert_eq!(w.anchors[0], 19);
        assert_eq!(w.anchors[1], 39);
        assert!(w.anchors.iter().all(|a| a + 20 < 500));
        assert!(w.anchors.len() >= 10);

        let capped = eval_windows(500, 20, 20, 12).unwrap();
        assert_eq!(capped.anchors.len(), 12);

        assert!(eval_windows(100, 20, 20, 0).is_err());
    }

    #[test]
    fn perfect_forecaster_has_zero_loss_everywhere() {
        let eval = toy_eval(300, 3);
        let windows = eval_windows(300, 5, 10, 0).unwrap();
        let truths = truth_tensor(&eval, &windows);
        let table = losses_from_forecasts(std::slice::from_ref(&truths), &truths).unwrap();
        assert!(table.losses.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_forecaster_recovers_climatological_variance() {
        // On standardized data the constant-zero forecast loses the trace of
        // the covariance, which is approximately the dimension d.
        let t = 5000;
        let d = 4;
        let mut rng_state = 0x12345u64;
        let mut next = move || {
            // xorshift for a quick standardized-ish stream
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            (rng_state >> 11) as f64 / (1u64 << 53) as f64
        };
        let raw = Array2::from_shape_fn((t, d), |_| {
            // sum of 12 uniforms, approximately N(0,1)
            (0..12).map(|_| next()).sum::<f64>() - 6.0
        });
        let mut std_data = raw.clone();
        for c in 0..d {
            let col = raw.column(c);
            let mean = col.sum() / t as f64;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / t as f64;
            std_data
                .column_mut(c)
                .iter_mut()
                .for_each(|v| *v = (*v - mean) / var.sqrt());
        }
        let eval = Trajectory::new(std_data, 1.0, TrajectorySource::External).unwrap();
        let windows = eval_windows(t, 4, 8, 0).unwrap();
        let truths = truth_tensor(&eval, &windows);
        let zeros = Array3::zeros(truths.dim());
        let table = losses_from_forecasts(std::slice::from_ref(&zeros), &truths).unwrap();
        for k in 0..4 {
            let loss = table.losses[[0, k]];
            assert!(
                (loss - d as f64).abs() < 0.25,
                "loss at horizon {} is {loss}, expected about {d}",
                k + 1
            );
        }
    }

    #[test]
    fn hand_built_two_by_two_table() {
        // 2 models, 2 horizons, 2 windows with hand-set forecasts.
        let d = 1;
        let mut truths = Array3::zeros((2, 2, d));
        truths[[0, 0, 0]] = 1.0;
        truths[[0, 1, 0]] = 2.0;
        truths[[1, 0, 0]] = 3.0;
        truths[[1, 1, 0]] = 4.0;
        // Model A: off by (0.1, 0.2) in window 0 and (0.3, 0.4) in window 1.
        let mut fa = truths.clone();
        fa[[0, 0, 0]] += 0.1;
        fa[[0, 1, 0]] += 0.2;
        fa[[1, 0, 0]] += 0.3;
        fa[[1, 1, 0]] += 0.4;
        // Model B: exact at k=1, off by 1.0 at k=2 in both windows.
        let mut fb = truths.clone();
        fb[[0, 1, 0]] += 1.0;
        fb[[1, 1, 0]] -= 1.0;
        let table = losses_from_forecasts(&[fa, fb], &truths).unwrap();
        // Hand arithmetic: A: k1 (0.01+0.09)/2 = 0.05, k2 (0.04+0.16)/2 = 0.10.
        assert!((table.losses[[0, 0]] - 0.05).abs() < 1e-15);
        assert!((table.losses[[0, 1]] - 0.10).abs() < 1e-15);
        assert_eq!(table.losses[[1, 0]], 0.0);
        assert!((table.losses[[1, 1]] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn diverged_forecasts_become_infinite_cells() {
        let truths = Array3::zeros((2, 3, 1));
        let mut fc = Array3::zeros((2, 3, 1));
        fc[[1, 2, 0]] = f64::NAN;
        let table = losses_from_forecasts(std::slice::from_ref(&fc), &truths).unwrap();
        assert_eq!(table.losses[[0, 0]], 0.0);
        assert_eq!(table.losses[[0, 2]], f64::INFINITY);
    }

    #[test]
    fn pool_losses_match_per_model_forecasts() {
        use crate::reservoir::{enumerate_grid, train_pool, GridAxes, ReservoirConfig};
        let train = toy_eval(400, 2);
        let eval = toy_eval(260, 2);
        let axes = GridAxes {
            n_r: vec![15, 30],
            rho: vec![0.8],
            sparsity_p: vec![0.5],
            leak_alpha: vec![0.7],
        };
        let base = ReservoirConfig {
            washout: 30,
            ..ReservoirConfig::default()
        };
        let configs = enumerate_grid(&axes, &base).unwrap();
        let pool = train_pool(&configs, &train, 5).unwrap();
        let table = evaluate_losses(&pool, &eval, 8, 20, 0).unwrap();
        assert_eq!(table.losses.dim(), (2, 8));

        // Spot-check one cell against a direct per-window computation.
        let windows = eval_windows(260, 8, 20, 0).unwrap();
        let truths = truth_tensor(&eval, &windows);
        let fc = model_forecasts(pool.model(1).unwrap(), &eval, &windows).unwrap();
        let k = 3;
        let mut acc = 0.0;
        for w in 0..windows.anchors.len() {
            let mut err = 0.0;
            for c in 0..2 {
                let diff = fc[[w, k, c]] - truths[[w, k, c]];
                err += diff * diff;
            }
            acc += err;
        }
        let expect = acc / windows.anchors.len() as f64;
        assert!((table.losses[[1, k]] - expect).abs() < 1e-12);
    }
}
