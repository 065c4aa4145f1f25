//! Contiguous train/validation/test splitting with train-fold
//! standardization applied to all three segments.

use super::Trajectory;
use crate::error::{Error, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Proportions of a trajectory given to each contiguous segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
}

impl SplitSpec {
    pub fn new(train_frac: f64, val_frac: f64, test_frac: f64) -> Result<Self> {
        let spec = Self {
            train_frac,
            val_frac,
            test_frac,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("train_frac", self.train_frac),
            ("val_frac", self.val_frac),
            ("test_frac", self.test_frac),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0,1), got {v}")));
            }
        }
        let sum = self.train_frac + self.val_frac + self.test_frac;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split fractions must sum to 1 within 1e-9, got {sum}"
            )));
        }
        Ok(())
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_frac: 0.6,
            val_frac: 0.2,
            test_frac: 0.2,
        }
    }
}

/// Standardized segments plus the train-fold moments that produced them.
#[derive(Debug, Clone)]
pub struct SplitResult {
    pub train: Trajectory,
    pub val: Trajectory,
    pub test: Trajectory,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Split into contiguous segments (train and val lengths rounded down, test
/// takes the remainder), compute per-coordinate mean/std on the train
/// segment only, and standardize all three. Zero stds are replaced by 1 so
/// constant channels map to zero rather than NaN.
pub fn split_standardize(traj: &Trajectory, spec: &SplitSpec) -> Result<SplitResult> {
    spec.validate()?;
    let t = traj.steps();
    let n_train = (spec.train_frac * t as f64).floor() as usize;
    let n_val = (spec.val_frac * t as f64).floor() as usize;
    let n_test = t - n_train - n_val;
    for (name, n) in [("train", n_train), ("val", n_val), ("test", n_test)] {
        if n < 2 {
            return Err(Error::Config(format!(
                "{name} segment would get {n} rows; need at least 2 (T={t})"
            )));
        }
    }

    let d = traj.dim();
    let data = traj.data();
    let train_view = data.slice(ndarray::s![..n_train, ..]);

    let mut mean = vec![0.0; d];
    let mut std = vec![0.0; d];
    for c in 0..d {
        let col = train_view.column(c);
        let m = col.sum() / n_train as f64;
        let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n_train as f64;
        mean[c] = m;
        let s = var.sqrt();
        std[c] = if s == 0.0 { 1.0 } else { s };
    }

    let standardize = |start: usize, end: usize| -> Result<Trajectory> {
        let mut seg: Array2<f64> = data.slice(ndarray::s![start..end, ..]).to_owned();
        for c in 0..d {
            let (m, s) = (mean[c], std[c]);
            seg.column_mut(c).iter_mut().for_each(|v| *v = (*v - m) / s);
        }
        Trajectory::new(seg, traj.dt(), traj.source())
    };

    Ok(SplitResult {
        train: standardize(0, n_train)?,
        val: standardize(n_train, n_train + n_val)?,
        test: standardize(n_train + n_val, t)?,
        mean,
        std,
    })
}
