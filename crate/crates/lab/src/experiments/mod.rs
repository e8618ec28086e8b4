//! The batch experiments behind the CLI subcommands.
//!
//! Every experiment writes into `<out>/<experiment>/`: one subdirectory per
//! sweep cell holding its `trace.csv` (and `final_matrix.csv` when asked for),
//! plus experiment-level `summary.csv` and `plot.svg`. Outputs depend only on
//! the resolved configuration, never on the worker count.

pub mod collide;
pub mod instance;
pub mod noise_sweep;
pub mod sparsify;
pub mod split;

use polylab_core::{TrainingTrace, WeightMatrix};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::{LabError, Result};
use crate::io;

/// Runs `f` over `cells` on `workers` threads and returns results in cell
/// order. On failure the error of the first failing cell is returned.
pub fn par_map<C, T, F>(workers: usize, cells: &[C], f: F) -> Result<Vec<T>>
where
    C: Sync,
    T: Send,
    F: Fn(&C) -> Result<T> + Sync + Send,
{
    let results: Vec<Result<T>> = if workers <= 1 {
        cells.iter().map(&f).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| LabError::config(format!("cannot start {workers} workers: {e}")))?;
        pool.install(|| cells.par_iter().map(&f).collect())
    };
    results.into_iter().collect()
}

/// Compact, filesystem-safe rendering of a parameter value for cell ids.
pub fn id_num(x: f64) -> String {
    format!("{x}")
}

/// Metadata header for a file belonging to `cell`.
pub fn cell_metadata(cfg: &ExperimentConfig, cell: &str, extra: &[(&str, String)]) -> io::Metadata {
    let mut pairs = vec![("cell", cell.to_string())];
    pairs.extend(extra.iter().cloned());
    io::metadata(&cfg.resolved(), &pairs)
}

/// Writes a cell's trace and, when requested, its final matrix.
pub fn write_cell(
    cfg: &ExperimentConfig,
    cell: &str,
    extra: &[(&str, String)],
    trace: &TrainingTrace,
    final_w: &WeightMatrix,
) -> Result<()> {
    let dir = io::cell_dir(&cfg.experiment_dir(), cell);
    let meta = cell_metadata(cfg, cell, extra);
    if cfg.emit.csv {
        io::write_trace(&dir.join("trace.csv"), &meta, trace)?;
    }
    if cfg.emit.final_matrix {
        io::write_matrix(&dir.join("final_matrix.csv"), &meta, final_w)?;
    }
    Ok(())
}

pub fn write_svg(cfg: &ExperimentConfig, name: &str, svg: &str) -> Result<()> {
    if cfg.emit.svg {
        io::write_text(&cfg.experiment_dir().join(name), svg)?;
    }
    Ok(())
}

pub fn write_summary(cfg: &ExperimentConfig, name: &str, extra: &[(&str, String)], header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let meta = io::metadata(&cfg.resolved(), extra);
    io::write_table(&cfg.experiment_dir().join(name), &meta, header, rows)
}

/// Ordinary least squares slope and intercept of `y` on `x`.
pub fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; 0 for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}
