//! Run configuration and result files.

mod config;
mod output;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{parse_config, ConfigError, LawKind, OutField, RegionMaterial, RunConfig};
pub use output::{nodal_pressure, timeseries_string, vtk_string, TIMESERIES_HEADER};

use crate::time::{DiscreteState, Problem};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn write_file(path: &Path, text: &str) -> Result<(), IoError> {
    std::fs::write(path, text).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes the snapshot of grid node `j` to `path`.
pub fn write_vtk(path: &Path, problem: &Problem, state: &DiscreteState, j: usize, fields: &[OutField]) -> Result<(), IoError> {
    write_file(path, &vtk_string(problem, state, j, fields))
}

pub fn write_timeseries(path: &Path, problem: &Problem, state: &DiscreteState) -> Result<(), IoError> {
    write_file(path, &timeseries_string(problem, state))
}

/// File name of the snapshot of node `j`.
pub fn vtk_name(j: usize) -> String {
    format!("state_{j:04}.vtk")
}

/// Writes `config.txt`, `timeseries.csv` and one VTK file per grid node into
/// `dir`, creating it if needed. Returns the paths written.
pub fn write_run(dir: &Path, cfg: &RunConfig, problem: &Problem, state: &DiscreteState) -> Result<Vec<PathBuf>, IoError> {
    std::fs::create_dir_all(dir).map_err(|source| IoError::File {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    let cfg_path = dir.join("config.txt");
    write_file(&cfg_path, &cfg.to_text())?;
    written.push(cfg_path);
    let ts = dir.join("timeseries.csv");
    write_timeseries(&ts, problem, state)?;
    written.push(ts);
    for j in 0..state.n_nodes() {
        let p = dir.join(vtk_name(j));
        write_vtk(&p, problem, state, j, &cfg.out_fields)?;
        written.push(p);
    }
    Ok(written)
}
