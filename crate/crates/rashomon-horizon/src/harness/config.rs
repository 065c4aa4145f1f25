//! Experiment configuration: a single JSON file with explicit keys.
//! Unknown keys are hard errors so typos cannot silently corrupt a run.

use crate::decision::{ActionSpace, UtilityFn};
use crate::dynamics::{SplitSpec, SystemSpec, DEFAULT_KS_DOMAIN, DEFAULT_KS_DT, DEFAULT_LORENZ96_DT};
use crate::error::{Error, Result};
use crate::reservoir::{GridAxes, ReservoirConfig};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Which system to generate (or which file to load) and how to sample it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemConfig {
    Lorenz96 {
        #[serde(default = "default_l96_d")]
        d: usize,
        #[serde(default = "default_l96_f")]
        f: f64,
        #[serde(default = "default_l96_dt")]
        dt: f64,
        #[serde(default = "default_steps")]
        steps: usize,
        #[serde(default = "default_l96_transient")]
        transient: usize,
        /// Record every n-th integration step.
        #[serde(default = "default_stride")]
        sample_stride: usize,
    },
    Ks {
        #[serde(default = "default_ks_n")]
        n: usize,
        #[serde(default = "default_ks_l")]
        l: f64,
        #[serde(default = "default_ks_dt")]
        dt: f64,
        #[serde(default = "default_steps")]
        steps: usize,
        #[serde(default = "default_ks_transient")]
        transient: usize,
        #[serde(default = "default_stride")]
        sample_stride: usize,
    },
    External {
        path: PathBuf,
        #[serde(default = "default_external_dt")]
        dt: f64,
    },
}

fn default_l96_d() -> usize {
    40
}
fn default_l96_f() -> f64 {
    10.0
}
fn default_l96_dt() -> f64 {
    DEFAULT_LORENZ96_DT
}
fn default_steps() -> usize {
    20_000
}
fn default_l96_transient() -> usize {
    1000
}
fn default_stride() -> usize {
    1
}
fn default_ks_n() -> usize {
    64
}
fn default_ks_l() -> f64 {
    DEFAULT_KS_DOMAIN
}
fn default_ks_dt() -> f64 {
    DEFAULT_KS_DT
}
fn default_ks_transient() -> usize {
    2000
}
fn default_external_dt() -> f64 {
    1.0
}

impl SystemConfig {
    pub fn spec(&self) -> SystemSpec {
        match self {
            SystemConfig::Lorenz96 { d, f, .. } => SystemSpec::Lorenz96 { d: *d, f: *f },
            SystemConfig::Ks { n, l, .. } => SystemSpec::Ks { n: *n, l: *l },
            SystemConfig::External { path, .. } => SystemSpec::External {
                path: path.display().to_string(),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec().validate()?;
        match self {
            SystemConfig::Lorenz96 {
                dt,
                steps,
                sample_stride,
                ..
            }
            | SystemConfig::Ks {
                dt,
                steps,
                sample_stride,
                ..
            } => {
                if !(*dt > 0.0) {
                    return Err(Error::Config(format!("dt must be positive, got {dt}")));
                }
                if *steps < 2 || *sample_stride < 1 {
                    return Err(Error::Config(
                        "steps must be at least 2 and sample_stride at least 1".into(),
                    ));
                }
            }
            SystemConfig::External { dt, .. } => {
                if !(*dt > 0.0) {
                    return Err(Error::Config(format!("dt must be positive, got {dt}")));
                }
            }
        }
        Ok(())
    }
}

/// Hyperparameter grid: a named preset or explicit axes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridConfig {
    Named(String),
    Explicit(GridAxes),
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig::Named("desk".into())
    }
}

impl GridConfig {
    pub fn axes(&self) -> Result<GridAxes> {
        match self {
            GridConfig::Named(name) => match name.as_str() {
                "desk" => Ok(GridAxes::desk()),
                "full" => Ok(GridAxes::full()),
                other => Err(Error::Config(format!(
                    "unknown grid preset '{other}' (expected 'desk' or 'full')"
                ))),
            },
            GridConfig::Explicit(axes) => {
                axes.validate()?;
                Ok(axes.clone())
            }
        }
    }
}

/// Shared reservoir settings applied to every grid point.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReservoirSettings {
    #[serde(default = "default_input_scale")]
    pub input_scale: f64,
    #[serde(default = "default_bias_std")]
    pub bias_std: f64,
    #[serde(default = "default_ridge_lambda")]
    pub ridge_lambda: f64,
    #[serde(default = "default_washout")]
    pub washout: usize,
    #[serde(default = "default_window_w")]
    pub window_w: usize,
}

fn default_input_scale() -> f64 {
    0.5
}
fn default_bias_std() -> f64 {
    0.1
}
fn default_ridge_lambda() -> f64 {
    1e-6
}
fn default_washout() -> usize {
    500
}
fn default_window_w() -> usize {
    20
}

impl Default for ReservoirSettings {
    fn default() -> Self {
        Self {
            input_scale: default_input_scale(),
            bias_std: default_bias_std(),
            ridge_lambda: default_ridge_lambda(),
            washout: default_washout(),
            window_w: default_window_w(),
        }
    }
}

impl ReservoirSettings {
    pub fn base_config(&self) -> ReservoirConfig {
        ReservoirConfig {
            input_scale: self.input_scale,
            bias_std: self.bias_std,
            ridge_lambda: self.ridge_lambda,
            washout: self.washout,
            window_w: self.window_w,
            ..ReservoirConfig::default()
        }
    }
}

/// Tolerance schedule: a target set-size band to calibrate against, or
/// explicit (alpha, beta, gamma).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EpsilonConfig {
    Band { band: [usize; 2] },
    Explicit { alpha: f64, beta: f64, gamma: f64 },
}

impl Default for EpsilonConfig {
    fn default() -> Self {
        EpsilonConfig::Band { band: [5, 50] }
    }
}

/// Horizon distribution presets.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PkConfig {
    Uniform,
    /// p_k proportional to q^k.
    Geometric { q: f64 },
    Explicit { weights: Vec<f64> },
}

impl Default for PkConfig {
    fn default() -> Self {
        PkConfig::Geometric { q: 0.9 }
    }
}

impl PkConfig {
    pub fn resolve(&self, k_max: usize) -> Result<Vec<f64>> {
        let raw: Vec<f64> = match self {
            PkConfig::Uniform => vec![1.0; k_max],
            PkConfig::Geometric { q } => {
                if !(*q > 0.0) {
                    return Err(Error::Config(format!("geometric q must be positive, got {q}")));
                }
                (1..=k_max).map(|k| q.powi(k as i32)).collect()
            }
            PkConfig::Explicit { weights } => {
                if weights.len() != k_max {
                    return Err(Error::Config(format!(
                        "p_k has {} weights for {} horizons",
                        weights.len(),
                        k_max
                    )));
                }
                if weights.iter().any(|w| *w < 0.0) || weights.iter().sum::<f64>() <= 0.0 {
                    return Err(Error::Config("p_k weights must be non-negative and sum > 0".into()));
                }
                weights.clone()
            }
        };
        let total: f64 = raw.iter().sum();
        Ok(raw.into_iter().map(|w| w / total).collect())
    }
}

/// Decision-layer settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionSettings {
    #[serde(default = "default_utility")]
    pub utility: UtilityFn,
    #[serde(default = "default_action_space")]
    pub action_space: ActionSpace,
    #[serde(default)]
    pub p_k: PkConfig,
    #[serde(default = "default_sample_size")]
    pub sample_size: usize,
    /// Aggregation exponent; the pipeline's Rosenstein estimate when absent.
    #[serde(default)]
    pub lambda_override: Option<f64>,
    #[serde(default)]
    pub sweep: Option<SweepSettings>,
}

fn default_utility() -> UtilityFn {
    UtilityFn::AsymmetricLinear {
        over_cost: 2.0,
        under_cost: 1.0,
    }
}

fn default_action_space() -> ActionSpace {
    ActionSpace::Box {
        lower: vec![-4.0],
        upper: vec![4.0],
    }
}

fn default_sample_size() -> usize {
    10
}

impl Default for DecisionSettings {
    fn default() -> Self {
        Self {
            utility: default_utility(),
            action_space: default_action_space(),
            p_k: PkConfig::default(),
            sample_size: default_sample_size(),
            lambda_override: None,
            sweep: None,
        }
    }
}

/// Sample-complexity sweep settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSettings {
    pub sizes: Vec<usize>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
}

fn default_repeats() -> usize {
    20
}

/// The complete experiment description, echoed verbatim into every run
/// directory for provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub reservoir: ReservoirSettings,
    #[serde(default = "default_horizons")]
    pub horizons: usize,
    #[serde(default = "default_warmup")]
    pub warmup: usize,
    /// Cap on evaluation windows per segment (0 = no cap).
    #[serde(default = "default_max_windows")]
    pub max_windows: usize,
    #[serde(default)]
    pub epsilon: EpsilonConfig,
    #[serde(default)]
    pub decision: DecisionSettings,
    #[serde(default = "default_master_seed")]
    pub master_seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Also write the per-model binary artifacts alongside the pool
    /// manifest.
    #[serde(default)]
    pub save_models: bool,
    #[serde(default)]
    pub write_trajectory: bool,
}

fn default_horizons() -> usize {
    20
}
fn default_warmup() -> usize {
    20
}
fn default_max_windows() -> usize {
    25
}
fn default_master_seed() -> u64 {
    42
}

impl ExperimentConfig {
    /// The built-in desk-scale experiment: Lorenz-96 at F = 10 with the
    /// 36-point grid.
    pub fn desk_default() -> Self {
        Self {
            system: SystemConfig::Lorenz96 {
                d: default_l96_d(),
                f: default_l96_f(),
                dt: default_l96_dt(),
                steps: default_steps(),
                transient: default_l96_transient(),
                sample_stride: default_stride(),
            },
            split: SplitSpec::default(),
            grid: GridConfig::default(),
            reservoir: ReservoirSettings::default(),
            horizons: default_horizons(),
            warmup: default_warmup(),
            max_windows: default_max_windows(),
            epsilon: EpsilonConfig::default(),
            decision: DecisionSettings::default(),
            master_seed: default_master_seed(),
            out_dir: None,
            save_models: false,
            write_trajectory: false,
        }
    }

    /// Parse a config file; any JSON or schema problem is a config error.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("invalid config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.split.validate()?;
        let axes = self.grid.axes()?;
        if axes.is_empty() {
            return Err(Error::Config("grid has no points".into()));
        }
        if self.horizons < 1 {
            return Err(Error::Config("horizons must be at least 1".into()));
        }
        if self.warmup < 1 {
            return Err(Error::Config("warmup must be at least 1".into()));
        }
        if let EpsilonConfig::Band { band } = &self.epsilon {
            if band[0] == 0 || band[0] > band[1] {
                return Err(Error::Config(format!(
                    "epsilon band [{}, {}] is not a valid size range",
                    band[0], band[1]
                )));
            }
        }
        if let EpsilonConfig::Explicit { alpha, beta, gamma } = &self.epsilon {
            if !(*alpha > 0.0 && *alpha < 1.0) || *beta < 0.0 || *gamma < 0.0 {
                return Err(Error::Config(
                    "explicit epsilon needs alpha in (0,1) and non-negative beta, gamma".into(),
                ));
            }
        }
        self.decision.action_space.validate()?;
        self.decision.utility.validate(&self.decision.action_space)?;
        self.decision.p_k.resolve(self.horizons)?;
        if self.decision.sample_size < 1 {
            return Err(Error::Config("sample_size must be at least 1".into()));
        }
        if let Some(sweep) = &self.decision.sweep {
            if sweep.sizes.is_empty() || sweep.sizes.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::Config("sweep sizes must be non-empty and ascending".into()));
            }
            if sweep.repeats < 1 {
                return Err(Error::Config("sweep repeats must be at least 1".into()));
            }
        }
        Ok(())
    }
}
