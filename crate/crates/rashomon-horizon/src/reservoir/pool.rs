//! Hyperparameter grids and deterministic parallel pool training.
//!
//! Each model's seed is a pure function of (master_seed, index), so a pool is
//! reproducible regardless of thread count or scheduling order.

use super::{build_reservoir, ReservoirConfig, ReservoirModel};
use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::seeding::derive_seed;
use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

const MODEL_MAGIC: &[u8; 8] = b"RHMODEL1";

/// Per-parameter value lists enumerated into configs in lexicographic order
/// (n_r, rho, sparsity_p, leak_alpha).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAxes {
    pub n_r: Vec<usize>,
    pub rho: Vec<f64>,
    pub sparsity_p: Vec<f64>,
    pub leak_alpha: Vec<f64>,
}

impl GridAxes {
    /// Laptop-scale subgrid: 2 x 3 x 2 x 3 = 36 configurations.
    pub fn desk() -> Self {
        Self {
            n_r: vec![200, 400],
            rho: vec![0.7, 0.9, 1.1],
            sparsity_p: vec![0.3, 0.7],
            leak_alpha: vec![0.3, 0.7, 1.0],
        }
    }

    /// The full 6 x 6 x 5 x 6 = 1080-point search grid.
    pub fn full() -> Self {
        Self {
            n_r: vec![100, 200, 400, 600, 800, 1000],
            rho: vec![0.5, 0.7, 0.9, 1.1, 1.3, 1.5],
            sparsity_p: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            leak_alpha: vec![0.1, 0.3, 0.5, 0.7, 0.9, 1.0],
        }
    }

    pub fn len(&self) -> usize {
        self.n_r.len() * self.rho.len() * self.sparsity_p.len() * self.leak_alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        for (name, empty) in [
            ("n_r", self.n_r.is_empty()),
            ("rho", self.rho.is_empty()),
            ("sparsity_p", self.sparsity_p.is_empty()),
            ("leak_alpha", self.leak_alpha.is_empty()),
        ] {
            if empty {
                return Err(Error::Config(format!("grid axis {name} is empty")));
            }
        }
        Ok(())
    }
}

/// Cartesian product of the axes over a base config carrying the shared
/// training settings. Seeds are left at the base value; pool training
/// derives per-model seeds.
pub fn enumerate_grid(axes: &GridAxes, base: &ReservoirConfig) -> Result<Vec<ReservoirConfig>> {
    axes.validate()?;
    let mut configs = Vec::with_capacity(axes.len());
    for &n_r in &axes.n_r {
        for &rho in &axes.rho {
            for &sparsity_p in &axes.sparsity_p {
                for &leak_alpha in &axes.leak_alpha {
                    configs.push(ReservoirConfig {
                        n_r,
                        rho,
                        sparsity_p,
                        leak_alpha,
                        ..base.clone()
                    });
                }
            }
        }
    }
    Ok(configs)
}

/// Outcome of building and training one grid point.
#[derive(Debug, Clone)]
pub enum PoolEntryState {
    Trained(ReservoirModel),
    Failed(String),
}

#[derive(Debug, Clone)]
pub struct PoolEntry {
    pub config: ReservoirConfig,
    pub state: PoolEntryState,
}

impl PoolEntry {
    pub fn model(&self) -> Option<&ReservoirModel> {
        match &self.state {
            PoolEntryState::Trained(m) => Some(m),
            PoolEntryState::Failed(_) => None,
        }
    }
}

/// The hypothesis class: an ordered list of trained (or failed) models.
#[derive(Debug, Clone)]
pub struct ModelPool {
    pub entries: Vec<PoolEntry>,
    pub master_seed: u64,
    pub input_dim: usize,
    pub axes: Option<GridAxes>,
}

impl ModelPool {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn model(&self, index: usize) -> Option<&ReservoirModel> {
        self.entries.get(index).and_then(|e| e.model())
    }

    pub fn trained_count(&self) -> usize {
        self.entries.iter().filter(|e| e.model().is_some()).count()
    }
}

/// Build and train every config in parallel. Individual failures are
/// recorded per entry; the call fails only when no model trains at all.
pub fn train_pool(
    configs: &[ReservoirConfig],
    train: &Trajectory,
    master_seed: u64,
) -> Result<ModelPool> {
    if configs.is_empty() {
        return Err(Error::Config("model pool needs at least one config".into()));
    }
    let input_dim = train.dim();
    let entries: Vec<PoolEntry> = configs
        .par_iter()
        .enumerate()
        .map(|(i, cfg)| {
            let config = ReservoirConfig {
                seed: derive_seed(master_seed, i as u64),
                ..cfg.clone()
            };
            let state = match build_reservoir(&config, input_dim)
                .and_then(|mut m| m.train_readout(train).map(|()| m))
            {
                Ok(model) => PoolEntryState::Trained(model),
                Err(e) => PoolEntryState::Failed(e.to_string()),
            };
            PoolEntry { config, state }
        })
        .collect();

    if entries.iter().all(|e| e.model().is_none()) {
        let first = entries
            .iter()
            .find_map(|e| match &e.state {
                PoolEntryState::Failed(msg) => Some(msg.clone()),
                PoolEntryState::Trained(_) => None,
            })
            .unwrap_or_default();
        return Err(Error::Config(format!("every model in the pool failed: {first}")));
    }
    Ok(ModelPool {
        entries,
        master_seed,
        input_dim,
        axes: None,
    })
}

#[derive(Serialize, Deserialize)]
struct PoolManifest {
    master_seed: u64,
    input_dim: usize,
    axes: Option<GridAxes>,
    models: Vec<ManifestEntry>,
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    index: usize,
    config: ReservoirConfig,
    status: String,
    file: Option<String>,
    error: Option<String>,
}

fn write_f64s(out: &mut impl Write, values: impl Iterator<Item = f64>) -> std::io::Result<()> {
    for v in values {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_f64s(data: &[u8], pos: &mut usize, count: usize) -> Result<Vec<f64>> {
    let need = count * 8;
    if *pos + need > data.len() {
        return Err(Error::Shape("model file truncated".into()));
    }
    let out = data[*pos..*pos + need]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    *pos += need;
    Ok(out)
}

impl ModelPool {
    /// Write a manifest plus one self-describing binary artifact per trained
    /// model: a JSON config header followed by the dense row-major matrices
    /// as little-endian 64-bit floats.
    pub fn save(&self, dir: &Path) -> Result<()> {
        self.save_with(dir, true)
    }

    /// As `save`, optionally skipping the binary artifacts (manifest only).
    pub fn save_with(&self, dir: &Path, include_models: bool) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut manifest = PoolManifest {
            master_seed: self.master_seed,
            input_dim: self.input_dim,
            axes: self.axes.clone(),
            models: Vec::new(),
        };
        for (i, entry) in self.entries.iter().enumerate() {
            let (status, file, error) = match &entry.state {
                PoolEntryState::Trained(model) => {
                    let name = format!("model_{i:04}.bin");
                    if include_models {
                        write_model(model, &dir.join(&name))?;
                    }
                    (
                        "trained".to_string(),
                        include_models.then_some(name),
                        None,
                    )
                }
                PoolEntryState::Failed(msg) => ("failed".to_string(), None, Some(msg.clone())),
            };
            manifest.models.push(ManifestEntry {
                index: i,
                config: entry.config.clone(),
                status,
                file,
                error,
            });
        }
        let json = serde_json::to_string_pretty(&manifest)?;
        fs::write(dir.join("manifest.json"), json)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<ModelPool> {
        let manifest_path = dir.join("manifest.json");
        if !manifest_path.exists() {
            return Err(Error::MissingArtifact {
                path: manifest_path.display().to_string(),
                stage: "pool".into(),
            });
        }
        let manifest: PoolManifest = serde_json::from_str(&fs::read_to_string(manifest_path)?)?;
        let mut entries = Vec::with_capacity(manifest.models.len());
        for m in manifest.models {
            let state = match (&m.file, m.status.as_str()) {
                (Some(name), _) => PoolEntryState::Trained(read_model(&dir.join(name))?),
                (None, "trained") => {
                    return Err(Error::MissingArtifact {
                        path: format!("{}/model_{:04}.bin", dir.display(), m.index),
                        stage: "pool (rerun with save_models enabled)".into(),
                    })
                }
                (None, _) => PoolEntryState::Failed(m.error.unwrap_or_default()),
            };
            entries.push(PoolEntry {
                config: m.config,
                state,
            });
        }
        Ok(ModelPool {
            entries,
            master_seed: manifest.master_seed,
            input_dim: manifest.input_dim,
            axes: manifest.axes,
        })
    }
}

fn write_model(model: &ReservoirModel, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    out.write_all(MODEL_MAGIC)?;
    let cfg_json = serde_json::to_vec(model.config())?;
    out.write_all(&(cfg_json.len() as u64).to_le_bytes())?;
    out.write_all(&cfg_json)?;
    out.write_all(&(model.input_dim() as u64).to_le_bytes())?;
    out.write_all(&(model.config().n_r as u64).to_le_bytes())?;
    write_f64s(&mut out, model.w_res().iter().copied())?;
    write_f64s(&mut out, model.w_in().iter().copied())?;
    write_f64s(&mut out, model.bias().iter().copied())?;
    match model.w_out() {
        Some(w) => {
            out.write_all(&[1u8])?;
            write_f64s(&mut out, w.iter().copied())?;
        }
        None => out.write_all(&[0u8])?,
    }
    out.flush()?;
    Ok(())
}

fn read_model(path: &Path) -> Result<ReservoirModel> {
    let mut data = Vec::new();
    fs::File::open(path)?.read_to_end(&mut data)?;
    if data.len() < 8 || &data[..8] != MODEL_MAGIC {
        return Err(Error::Parse {
            row: 1,
            col: 1,
            reason: format!("{} is not a model artifact", path.display()),
        });
    }
    let mut pos = 8;
    let take_u64 = |data: &[u8], pos: &mut usize| -> Result<u64> {
        if *pos + 8 > data.len() {
            return Err(Error::Shape("model file truncated".into()));
        }
        let v = u64::from_le_bytes(data[*pos..*pos + 8].try_into().unwrap());
        *pos += 8;
        Ok(v)
    };
    let cfg_len = take_u64(&data, &mut pos)? as usize;
    if pos + cfg_len > data.len() {
        return Err(Error::Shape("model file truncated".into()));
    }
    let config: ReservoirConfig = serde_json::from_slice(&data[pos..pos + cfg_len])?;
    pos += cfg_len;
    let input_dim = take_u64(&data, &mut pos)? as usize;
    let n_r = take_u64(&data, &mut pos)? as usize;

    let w_res = Array2::from_shape_vec((n_r, n_r), read_f64s(&data, &mut pos, n_r * n_r)?)
        .map_err(|e| Error::Shape(e.to_string()))?;
    let w_in = Array2::from_shape_vec((n_r, input_dim), read_f64s(&data, &mut pos, n_r * input_dim)?)
        .map_err(|e| Error::Shape(e.to_string()))?;
    let bias = Array1::from_vec(read_f64s(&data, &mut pos, n_r)?);
    let trained = {
        if pos >= data.len() {
            return Err(Error::Shape("model file truncated".into()));
        }
        let flag = data[pos];
        pos += 1;
        flag == 1
    };
    let w_out = if trained {
        Some(
            Array2::from_shape_vec((n_r, input_dim), read_f64s(&data, &mut pos, n_r * input_dim)?)
                .map_err(|e| Error::Shape(e.to_string()))?,
        )
    } else {
        None
    };
    Ok(ReservoirModel::from_parts(
        config, w_res, w_in, bias, w_out, input_dim,
    ))
}
