//! Synthetic chaotic benchmark systems and time-series plumbing.
//!
//! Provides Lorenz-96 (RK4) and Kuramoto-Sivashinsky (ETDRK4 spectral)
//! generators, CSV ingestion for external series, and contiguous
//! train/validation/test splitting with train-fold standardization.

mod io;
mod ks;
mod lorenz96;
mod split;

pub use io::{load_csv, write_trajectory_csv};
pub use ks::{simulate_ks, simulate_ks_from, KsStepper, DEFAULT_KS_DOMAIN, DEFAULT_KS_DT};
pub use lorenz96::{simulate_lorenz96, simulate_lorenz96_from, Lorenz96, DEFAULT_LORENZ96_DT};
pub use split::{split_standardize, SplitResult, SplitSpec};

use crate::error::{Error, Result};
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

/// Origin tag carried by every trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectorySource {
    Lorenz96,
    Ks,
    External,
}

/// A T x d real-valued time series with a fixed sampling interval.
#[derive(Debug, Clone)]
pub struct Trajectory {
    data: Array2<f64>,
    dt: f64,
    source: TrajectorySource,
}

impl Trajectory {
    /// Wrap a matrix of states (rows = time steps), checking the invariants:
    /// at least two steps, at least one coordinate, positive dt, finite data.
    pub fn new(data: Array2<f64>, dt: f64, source: TrajectorySource) -> Result<Self> {
        if data.nrows() < 2 {
            return Err(Error::Shape(format!(
                "trajectory needs at least 2 steps, got {}",
                data.nrows()
            )));
        }
        if data.ncols() < 1 {
            return Err(Error::Shape("trajectory needs at least 1 coordinate".into()));
        }
        if !(dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {dt}")));
        }
        if let Some((row, _)) = data
            .rows()
            .into_iter()
            .enumerate()
            .find(|(_, r)| r.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Shape(format!("non-finite entry in trajectory row {row}")));
        }
        Ok(Self { data, dt, source })
    }

    pub fn data(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    /// Number of time steps T.
    pub fn steps(&self) -> usize {
        self.data.nrows()
    }

    /// State dimension d.
    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn source(&self) -> TrajectorySource {
        self.source
    }

    /// One observable channel as a contiguous vector.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.data.column(c).to_vec()
    }

    /// Contiguous sub-trajectory over `rows` (used by splitting).
    pub(crate) fn slice_rows(&self, start: usize, end: usize) -> Result<Trajectory> {
        Trajectory::new(
            self.data.slice(ndarray::s![start..end, ..]).to_owned(),
            self.dt,
            self.source,
        )
    }
}

/// Which system a trajectory comes from, with its defining parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum SystemSpec {
    Lorenz96 { d: usize, f: f64 },
    Ks { n: usize, l: f64 },
    External { path: String },
}

impl SystemSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            SystemSpec::Lorenz96 { d, f } => {
                if *d < 4 {
                    return Err(Error::Config(format!(
                        "lorenz96 needs d >= 4 (coupling stencil), got {d}"
                    )));
                }
                if !(*f > 0.0) {
                    return Err(Error::Config(format!("lorenz96 forcing must be positive, got {f}")));
                }
            }
            SystemSpec::Ks { n, l } => {
                if *n < 8 || n % 2 != 0 {
                    return Err(Error::Config(format!("ks needs even n >= 8, got {n}")));
                }
                if !(*l > 0.0) {
                    return Err(Error::Config(format!("ks domain length must be positive, got {l}")));
                }
            }
            SystemSpec::External { .. } => {}
        }
        Ok(())
    }
}
