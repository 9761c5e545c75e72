//! CSV and JSON writers. Every CSV starts with a `# dfrc-secure-beamformer v1`
//! comment line; readers should skip lines beginning with `#`.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use dfrc_core::designers::DesignTrace;
use dfrc_core::model::{beampattern_gain, linear_to_db, rad_to_deg, total_cov, AngleGrid, ArrayGeometry, BeamDesign};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

pub const SCHEMA: &str = "dfrc-secure-beamformer v1";

/// Gains below this (mW) are clamped before conversion to dB.
pub const GAIN_FLOOR: f64 = 1e-30;

/// Fails early if `path` cannot be opened for writing. Creates the file
/// when missing but leaves existing contents alone.
pub fn check_writable(path: &Path) -> Result<(), HarnessError> {
    OpenOptions::new()
        .write(true)
        .create(true)
        .truncate(false)
        .open(path)
        .map(drop)
        .map_err(|source| HarnessError::Unwritable { path: path.to_path_buf(), source })
}

fn create(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    let f = File::create(path).map_err(|source| HarnessError::Unwritable { path: path.to_path_buf(), source })?;
    Ok(BufWriter::new(f))
}

/// Writes `rows` to `out` as CSV preceded by the schema comment.
pub fn write_csv_to<W: Write, T: Serialize>(mut out: W, rows: &[T]) -> Result<(), HarnessError> {
    writeln!(out, "# {SCHEMA}")?;
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), HarnessError> {
    write_csv_to(create(path)?, rows)
}

/// Reads a CSV written by [`write_csv`].
pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    r.deserialize().map(|row| row.map_err(HarnessError::from)).collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeampatternRow {
    pub label: String,
    pub theta_deg: f64,
    pub gain_db: f64,
}

/// `(θ in degrees, 10 log10 P(θ))` of the total transmit covariance over
/// `grid`.
pub fn emit_beampattern(
    design: &BeamDesign,
    geom: &ArrayGeometry,
    grid: &AngleGrid,
) -> Result<Vec<(f64, f64)>, HarnessError> {
    let r = total_cov(design)?;
    grid.iter()
        .map(|theta| {
            let g = beampattern_gain(&r, geom, theta)?;
            Ok((rad_to_deg(theta), linear_to_db(g.max(GAIN_FLOOR))))
        })
        .collect()
}

pub fn labelled(label: &str, points: &[(f64, f64)]) -> Vec<BeampatternRow> {
    points
        .iter()
        .map(|&(theta_deg, gain_db)| BeampatternRow { label: label.to_string(), theta_deg, gain_db })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub label: String,
    pub iteration: usize,
    pub objective: f64,
    /// `y` after the iteration, `;`-separated; empty for the Dinkelbach loop.
    pub y: String,
}

pub fn convergence_rows(label: &str, trace: &DesignTrace) -> Vec<ConvergenceRow> {
    trace
        .objective_per_iter
        .iter()
        .enumerate()
        .map(|(i, &objective)| ConvergenceRow {
            label: label.to_string(),
            iteration: i + 1,
            objective,
            y: trace
                .y_per_iter
                .as_ref()
                .and_then(|ys| ys.get(i))
                .map(|y| y.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";"))
                .unwrap_or_default(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use dfrc_core::linalg::CMat;

    #[test]
    fn isotropic_design_gives_flat_line_at_total_power() {
        let n = 8;
        let p0 = 1000.0;
        let geom = ArrayGeometry::half_wavelength(n).unwrap();
        let an = CMat::identity(n, n).scale(p0 / n as f64);
        let d = BeamDesign::new(vec![CMat::zeros(n, n)], an);
        let grid = AngleGrid::full_range_deg(1.0).unwrap();
        let pts = emit_beampattern(&d, &geom, &grid).unwrap();
        assert_eq!(pts.len(), 181);
        assert_eq!(pts[0].0, -90.0);
        assert_eq!(pts[180].0, 90.0);
        for (_, db) in pts {
            assert!((db - 10.0 * p0.log10()).abs() < 1e-9);
        }
    }

    #[test]
    fn null_gain_is_clamped() {
        let d = BeamDesign::zeros(1, 4);
        let geom = ArrayGeometry::half_wavelength(4).unwrap();
        let grid = AngleGrid::new(vec![0.0]).unwrap();
        let pts = emit_beampattern(&d, &geom, &grid).unwrap();
        assert_eq!(pts[0].1, -300.0);
    }

    #[test]
    fn csv_starts_with_schema_comment() {
        let mut buf = Vec::new();
        write_csv_to(&mut buf, &labelled("x", &[(0.0, 1.5)])).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "# dfrc-secure-beamformer v1\nlabel,theta_deg,gain_db\nx,0.0,1.5\n");
    }

    #[test]
    fn convergence_rows_join_y() {
        let trace = DesignTrace {
            objective_per_iter: vec![2.0, 1.0],
            y_per_iter: Some(vec![vec![1.0, 2.5], vec![0.5, 0.25]]),
            iterations: 2,
            converged: true,
        };
        let rows = convergence_rows("wide", &trace);
        assert_eq!(rows[1].iteration, 2);
        assert_eq!(rows[1].y, "0.5;0.25");
    }
}
