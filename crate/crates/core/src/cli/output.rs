//! CSV and JSON writers. Floats use Rust's shortest round-trip formatting,
//! so every value re-parses to the identical `f64`.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::analysis::PriorSamples;
use crate::error::{Error, Result};
use crate::filter::FilterTrajectory;

pub fn trajectory_header(q: usize, d: usize) -> Vec<String> {
    let mut header = vec!["t".to_string()];
    for i in 0..=q {
        for j in 0..d {
            header.push(format!("mean_{i}_{j}"));
        }
    }
    for i in 0..=q {
        header.push(format!("var_{i}"));
    }
    header
}

/// Columns: `t`, `mean_i_j` for `i = 0..=q`, `j = 0..d`, then `var_i`.
pub fn write_trajectory_csv(path: &Path, traj: &FilterTrajectory) -> Result<()> {
    let (n, d) = (traj.state_len(), traj.dim());
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(trajectory_header(n - 1, d))?;
    for s in &traj.states {
        let mut row = Vec::with_capacity(1 + n * d + n);
        row.push(s.t.to_string());
        for i in 0..n {
            for j in 0..d {
                row.push(s.mean[(i, j)].to_string());
            }
        }
        row.extend(s.cov.diagonal().iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Parsed `trajectory.csv`: times, `(q+1)×d` means and diagonal variances.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryTable {
    pub times: Vec<f64>,
    pub means: Vec<DMatrix<f64>>,
    pub variances: Vec<Vec<f64>>,
}

pub fn read_trajectory_csv(path: &Path) -> Result<TrajectoryTable> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let n_vars = header.iter().filter(|h| h.starts_with("var_")).count();
    let n_means = header.iter().filter(|h| h.starts_with("mean_")).count();
    if n_vars == 0 || n_means % n_vars != 0 {
        return Err(Error::GridMismatch(format!(
            "malformed trajectory header: {header:?}"
        )));
    }
    let d = n_means / n_vars;
    let mut table = TrajectoryTable {
        times: Vec::new(),
        means: Vec::new(),
        variances: Vec::new(),
    };
    for record in r.records() {
        let record = record?;
        let values: Vec<f64> = record
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::GridMismatch(format!("bad number in trajectory: {e}")))?;
        table.times.push(values[0]);
        table
            .means
            .push(DMatrix::from_row_slice(n_vars, d, &values[1..1 + n_means]));
        table.variances.push(values[1 + n_means..].to_vec());
    }
    Ok(table)
}

/// Columns `t, path_0, …, path_{n-1}` for one state coordinate.
pub fn write_samples_csv(path: &Path, samples: &PriorSamples, coord: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string()];
    header.extend((0..samples.paths.len()).map(|i| format!("path_{i}")));
    w.write_record(&header)?;
    for (k, t) in samples.times.iter().enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(samples.paths.iter().map(|p| p[(k, coord)].to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n")?;
    Ok(())
}
