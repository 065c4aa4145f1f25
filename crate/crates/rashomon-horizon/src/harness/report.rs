//! Figure-data emission from completed runs.
//!
//! A run directory (one `manifest.json`) yields per-run figure CSVs; a
//! directory of run directories additionally yields the forcing-sweep
//! summary table. Missing artifacts name the stage to rerun.

use super::artifacts::{fmt_f64, read_json, write_csv};
use crate::error::{Error, Result};
use serde_json::Value;
use std::path::{Path, PathBuf};

fn as_f64(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

/// Figure CSVs for one completed pipeline run, written into
/// `<run>/figures/`. Returns the paths written.
pub fn report_run(run: &Path) -> Result<Vec<PathBuf>> {
    let manifest = read_json(&run.join("manifest.json"), "pipeline")?;
    let sets = read_json(&run.join("sets.json"), "build_sets")?;
    let contraction = read_json(&run.join("contraction.json"), "fit_contraction")?;
    let multiplicity = read_json(&run.join("multiplicity.json"), "multiplicity")?;
    let selection = read_json(&run.join("selection.json"), "selection")?;
    let figures = run.join("figures");
    let mut written = Vec::new();

    // Set size vs horizon with the fitted exponential overlay.
    {
        let members = sets["members"].as_array().cloned().unwrap_or_default();
        let rate = as_f64(&contraction["rate"]);
        // Anchor the overlay at the first horizon's size.
        let first_size = members.first().map_or(1.0, |m| m.as_array().map_or(1.0, |a| a.len() as f64));
        let rows: Vec<Vec<String>> = members
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let size = m.as_array().map_or(0, |a| a.len());
                let fit = first_size * (-rate * k as f64).exp();
                vec![
                    (k + 1).to_string(),
                    size.to_string(),
                    fmt_f64((size.max(1) as f64).ln()),
                    fmt_f64(fit),
                ]
            })
            .collect();
        let path = figures.join("set_size_vs_horizon.csv");
        write_csv(&path, &["horizon", "size", "log_size", "fit"], &rows)?;
        written.push(path);
    }

    // Realized utility per strategy and horizon.
    {
        let mut rows = Vec::new();
        for (name, key) in [
            ("decision_aligned", "chosen"),
            ("single_best", "single_best"),
            ("ensemble", "ensemble"),
            ("random", "random"),
            ("oracle", "oracle"),
        ] {
            let outcome = &selection[key];
            if let Some(per) = outcome["per_horizon"].as_array() {
                for (k, u) in per.iter().enumerate() {
                    if u.is_f64() {
                        rows.push(vec![
                            name.to_string(),
                            (k + 1).to_string(),
                            fmt_f64(as_f64(u)),
                        ]);
                    }
                }
            }
            rows.push(vec![
                name.to_string(),
                "aggregate".to_string(),
                fmt_f64(as_f64(&outcome["utility"])),
            ]);
        }
        let path = figures.join("utility_by_strategy.csv");
        write_csv(&path, &["strategy", "horizon", "utility"], &rows)?;
        written.push(path);
    }

    // Agreement matrix (symmetric, unit diagonal).
    {
        let agreement = multiplicity["agreement"].as_array().cloned().unwrap_or_default();
        let k_max = agreement.len();
        let header: Vec<String> = std::iter::once("horizon".to_string())
            .chain((1..=k_max).map(|k| format!("k{k}")))
            .collect();
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows: Vec<Vec<String>> = agreement
            .iter()
            .enumerate()
            .map(|(i, row)| {
                std::iter::once((i + 1).to_string())
                    .chain(
                        row.as_array()
                            .into_iter()
                            .flatten()
                            .map(|v| fmt_f64(as_f64(v))),
                    )
                    .collect()
            })
            .collect();
        let path = figures.join("agreement_matrix.csv");
        write_csv(&path, &header_refs, &rows)?;
        written.push(path);
    }

    // Sample-complexity curve, when the sweep ran.
    if run.join("sweep.csv").exists() {
        let target = figures.join("sample_complexity.csv");
        std::fs::copy(run.join("sweep.csv"), &target)?;
        written.push(target);
    }

    let _ = manifest;
    Ok(written)
}

/// One row of the forcing-sweep summary.
struct SweepRow {
    f: f64,
    lambda_hat: f64,
    benettin: f64,
    rate: f64,
    r2: f64,
    size_at_last: usize,
    rho_l: f64,
}

/// Aggregate several completed runs (subdirectories with manifests) into a
/// forcing-sweep summary sorted by F.
pub fn report_sweep(root: &Path) -> Result<PathBuf> {
    let mut rows: Vec<SweepRow> = Vec::new();
    for entry in std::fs::read_dir(root)? {
        let path = entry?.path();
        if !path.is_dir() || !path.join("manifest.json").exists() {
            continue;
        }
        let manifest = read_json(&path.join("manifest.json"), "pipeline")?;
        let system = &manifest["config"]["system"];
        if system["kind"].as_str() != Some("lorenz96") {
            continue;
        }
        let sets = read_json(&path.join("sets.json"), "build_sets")?;
        let last_size = sets["members"]
            .as_array()
            .and_then(|m| m.last())
            .and_then(|m| m.as_array())
            .map_or(0, |a| a.len());
        rows.push(SweepRow {
            f: as_f64(&system["f"]),
            lambda_hat: as_f64(&manifest["lambda_max"]),
            benettin: as_f64(&manifest["benettin"]["lambda_max"]),
            rate: as_f64(&manifest["contraction"]["rate"]),
            r2: as_f64(&manifest["contraction"]["r2"]),
            size_at_last: last_size,
            rho_l: as_f64(&manifest["rho_l"]),
        });
    }
    if rows.is_empty() {
        return Err(Error::MissingArtifact {
            path: root.display().to_string(),
            stage: "pipeline (no completed lorenz96 runs found)".into(),
        });
    }
    rows.sort_by(|a, b| a.f.total_cmp(&b.f));
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.f),
                fmt_f64(r.lambda_hat),
                fmt_f64(r.benettin),
                fmt_f64(r.rate),
                fmt_f64(r.r2),
                r.size_at_last.to_string(),
                fmt_f64(r.rho_l),
            ]
        })
        .collect();
    let path = root.join("f_sweep_summary.csv");
    write_csv(
        &path,
        &[
            "f",
            "lambda_hat",
            "benettin",
            "contraction_rate",
            "contraction_r2",
            "set_size_at_k_max",
            "rho_l",
        ],
        &csv_rows,
    )?;
    Ok(path)
}

/// `report`: per-run figures when `dir` is a run, plus the sweep summary
/// when it contains several runs.
pub fn run_report(dir: &Path) -> Result<Vec<PathBuf>> {
    if dir.join("manifest.json").exists() {
        return report_run(dir);
    }
    // Directory of runs: per-run figures plus the cross-run summary.
    let mut written = Vec::new();
    let mut found_any = false;
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.join("manifest.json").exists())
        .collect();
    entries.sort();
    for run in entries {
        written.extend(report_run(&run)?);
        found_any = true;
    }
    if !found_any {
        return Err(Error::MissingArtifact {
            path: dir.join("manifest.json").display().to_string(),
            stage: "pipeline".into(),
        });
    }
    written.push(report_sweep(dir)?);
    Ok(written)
}
