//! Interference-free l1 sparsification of long encodings, against the
//! predicted `|W_i|_1 ~ 1/(lambda t)` law.

use polylab_core::analysis::{predicted_l1, predicted_m_prime, relative_variance_bounds};
use polylab_core::l1::L1Trainer;
use polylab_core::matrix::init_weights;
use polylab_core::metrics::slice_metrics;
use polylab_core::rng::{stream, Stream};
use polylab_core::{ModelConfig, TrainingTrace, WeightMatrix};

use super::{id_num, par_map, write_cell, write_summary, write_svg};
use crate::config::ExperimentConfig;
use crate::error::{LabError, Result};
use crate::io::fmt_f64;
use crate::svg::{Plot, Series, Style};

/// Relative variance of a row's surviving magnitudes at one recorded step,
/// with the bracket implied by its initial values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelVarPoint {
    pub step: u64,
    pub t: f64,
    pub row: usize,
    pub m_prime: usize,
    pub relvar: f64,
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone)]
pub struct SparsifyRun {
    pub cell: String,
    pub seed: u64,
    pub trace: TrainingTrace,
    pub relvar: Vec<RelVarPoint>,
    pub final_w: WeightMatrix,
}

/// Trains one cell, recording metrics and the relative-variance brackets.
pub fn train_cell(model: &ModelConfig, cell: &str) -> Result<SparsifyRun> {
    model.validate().map_err(|e| LabError::from_model(cell, e))?;
    let w0 = init_weights(model, &mut stream(model.seed, Stream::Init));
    let mut trainer = L1Trainer::new(model, w0.clone()).map_err(|e| LabError::from_model(cell, e))?;
    let mut trace = TrainingTrace::new();
    let mut relvar = Vec::new();
    let last = model.steps;
    if last > 0 {
        loop {
            let step = trainer.step_count();
            if model.schedule.records(step, last) {
                let w = trainer.weights();
                trace.push_snapshot(step, trainer.time(), w, trainer.loss(), model.eps_zero);
                for i in 0..w.rows() {
                    let mt = slice_metrics(w.row(i), 0.0);
                    if let Some(rv) = mt.relative_variance {
                        let (low, high) =
                            relative_variance_bounds(w0.row(i), mt.nonzero_count).map_err(|e| LabError::from_model(cell, e))?;
                        relvar.push(RelVarPoint { step, t: trainer.time(), row: i, m_prime: mt.nonzero_count, relvar: rv, low, high });
                    }
                }
            }
            if step == last {
                break;
            }
            trainer.step().map_err(|e| LabError::from_model(cell, e))?;
        }
    }
    Ok(SparsifyRun { cell: cell.to_string(), seed: model.seed, trace, relvar, final_w: trainer.into_weights() })
}

pub fn run_sparsify(cfg: &ExperimentConfig) -> Result<Vec<SparsifyRun>> {
    cfg.validate()?;
    let base = cfg.model_config();
    let seeds = cfg.seeds();
    let runs = par_map(cfg.workers, &seeds, |&seed| {
        let cell = format!("m{}-lambda{}-seed{seed}", base.m, id_num(base.lambda));
        let model = ModelConfig { seed, ..base.clone() };
        let run = train_cell(&model, &cell)?;
        write_cell(cfg, &cell, &[("cell.seed", seed.to_string())], &run.trace, &run.final_w)?;
        Ok(run)
    })?;

    let (m, lambda) = (base.m, base.lambda);
    let mut rows = Vec::new();
    let mut rv_rows = Vec::new();
    for run in &runs {
        for r in &run.trace.records {
            rows.push(vec![
                run.cell.clone(),
                r.step.to_string(),
                fmt_f64(r.t),
                r.row.to_string(),
                fmt_f64(r.l1),
                r.m_prime.to_string(),
                fmt_f64(predicted_l1(r.t, m, lambda)),
                fmt_f64(predicted_m_prime(r.t, m, lambda)),
            ]);
        }
        for p in &run.relvar {
            rv_rows.push(vec![
                run.cell.clone(),
                p.step.to_string(),
                fmt_f64(p.t),
                p.row.to_string(),
                p.m_prime.to_string(),
                fmt_f64(p.relvar),
                fmt_f64(p.low),
                fmt_f64(p.high),
            ]);
        }
    }
    write_summary(
        cfg,
        "summary.csv",
        &[],
        &["cell", "step", "t", "row", "l1", "m_prime", "predicted_l1", "predicted_m_prime"],
        &rows,
    )?;
    write_summary(cfg, "relvar.csv", &[], &["cell", "step", "t", "row", "m_prime", "relvar", "low", "high"], &rv_rows)?;

    if cfg.emit.svg {
        write_svg(cfg, "plot.svg", &sparsify_plot(&runs, m, lambda).render())?;
        write_svg(cfg, "relvar.svg", &relvar_plot(&runs).render())?;
    }
    Ok(runs)
}

fn sparsify_plot(runs: &[SparsifyRun], m: usize, lambda: f64) -> Plot {
    let mut plot = Plot::new(format!("l1 sparsification, m = {m}, lambda = {lambda}"), "t", "value").log_x().log_y();
    for run in runs {
        let row0 = || run.trace.row(0).filter(|r| r.t > 0.0);
        plot = plot
            .with(Series::new(format!("|W|_1 ({})", run.seed), row0().map(|r| (r.t, r.l1)).collect(), Style::Line))
            .with(Series::new(format!("m' ({})", run.seed), row0().map(|r| (r.t, r.m_prime as f64)).collect(), Style::Line));
    }
    if let Some(run) = runs.first() {
        let ts: Vec<f64> = run.trace.row(0).map(|r| r.t).filter(|&t| t > 0.0).collect();
        plot = plot
            .with(Series::new("predicted |W|_1", ts.iter().map(|&t| (t, predicted_l1(t, m, lambda))).collect(), Style::Dashed))
            .with(Series::new("predicted m'", ts.iter().map(|&t| (t, predicted_m_prime(t, m, lambda))).collect(), Style::Dashed));
    }
    plot
}

fn relvar_plot(runs: &[SparsifyRun]) -> Plot {
    let mut plot = Plot::new("relative variance of surviving weights", "m'", "relative variance").log_x();
    for run in runs {
        let pts = |f: fn(&RelVarPoint) -> f64| run.relvar.iter().filter(|p| p.row == 0).map(|p| (p.m_prime as f64, f(p))).collect();
        plot = plot
            .with(Series::new(format!("empirical ({})", run.seed), pts(|p| p.relvar), Style::Markers))
            .with(Series::new("lower bracket", pts(|p| p.low), Style::Dashed))
            .with(Series::new("upper bracket", pts(|p| p.high), Style::Dashed));
    }
    plot
}
