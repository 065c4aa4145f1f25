//! CSV ingestion and emission for trajectories.
//!
//! Format: comma-separated, one time step per row, optional single header
//! row. Values are written with 17 significant digits so that round-trips
//! are exact.

use super::{Trajectory, TrajectorySource};
use crate::error::{Error, Result};
use ndarray::Array2;
use std::fs;
use std::io::Write;
use std::path::Path;

/// Render a float with enough digits for an exact f64 round-trip.
pub(crate) fn format_full(v: f64) -> String {
    format!("{v:.16e}")
}

/// Load a rectangular numeric CSV as a trajectory with the given sampling
/// interval. The first row is treated as a header when none of its fields
/// parse as numbers. Row/column positions in errors are 1-based file
/// coordinates.
pub fn load_csv(path: &Path, dt: f64) -> Result<Trajectory> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    let mut first_data_seen = false;

    for (line_idx, line) in text.lines().enumerate() {
        let row_no = line_idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if !first_data_seen {
            let none_numeric = fields.iter().all(|f| f.parse::<f64>().is_err());
            if none_numeric && line_idx == 0 {
                continue; // header
            }
        }
        first_data_seen = true;

        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(Error::Parse {
                    row: row_no,
                    col: fields.len().min(w) + 1,
                    reason: format!("expected {w} fields, found {}", fields.len()),
                });
            }
            _ => {}
        }

        let mut row = Vec::with_capacity(fields.len());
        for (col_idx, field) in fields.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                row: row_no,
                col: col_idx + 1,
                reason: format!("'{field}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: row_no,
                    col: col_idx + 1,
                    reason: format!("non-finite value {v}"),
                });
            }
            row.push(v);
        }
        rows.push(row);
    }

    if rows.is_empty() {
        return Err(Error::Parse {
            row: 1,
            col: 1,
            reason: "no numeric rows in file".into(),
        });
    }
    let d = width.unwrap_or(0);
    let t = rows.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let data = Array2::from_shape_vec((t, d), flat)
        .map_err(|e| Error::Shape(format!("csv reshape failed: {e}")))?;
    Trajectory::new(data, dt, TrajectorySource::External)
}

/// Write a trajectory as a headerless numeric CSV.
pub fn write_trajectory_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for row in traj.data().rows() {
        let line: Vec<String> = row.iter().map(|&v| format_full(v)).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reads_plain_matrix() {
        let f = write_tmp("1,2\n3,4\n5,6\n");
        let traj = load_csv(f.path(), 1.0).unwrap();
        assert_eq!(traj.steps(), 3);
        assert_eq!(traj.dim(), 2);
        assert_eq!(traj.data()[[2, 1]], 6.0);
        assert_eq!(traj.source(), TrajectorySource::External);
    }

    #[test]
    fn skips_header_row() {
        let f = write_tmp("a,b\n1,2\n3,4\n");
        let traj = load_csv(f.path(), 0.5).unwrap();
        assert_eq!(traj.steps(), 2);
    }

    #[test]
    fn reports_bad_cell_position() {
        let f = write_tmp("1,x\n");
        match load_csv(f.path(), 1.0) {
            Err(Error::Parse { row, col, .. }) => {
                assert_eq!((row, col), (1, 2));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn reports_ragged_rows() {
        let f = write_tmp("1,2\n3\n");
        match load_csv(f.path(), 1.0) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_a_parse_error() {
        let f = write_tmp("");
        assert!(matches!(load_csv(f.path(), 1.0), Err(Error::Parse { .. })));
    }

    #[test]
    fn roundtrip_is_exact() {
        use ndarray::array;
        let traj = Trajectory::new(
            array![[1.0 / 3.0, 2.0e-17], [std::f64::consts::PI, -4.5]],
            0.25,
            TrajectorySource::External,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_trajectory_csv(&traj, &path).unwrap();
        let back = load_csv(&path, 0.25).unwrap();
        assert_eq!(traj.data(), back.data());
    }
}
