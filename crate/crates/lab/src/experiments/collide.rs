//! Full l1 training across hidden widths: how many neurons end up
//! polysemantic, against the `n (n - 1) / (4 m)` collision count.

use polylab_core::analysis::{classify_collisions, count_polysemantic, expected_polysemantic};
use polylab_core::l1::L1Trainer;
use polylab_core::matrix::init_weights;
use polylab_core::rng::{stream, Stream};
use polylab_core::{ModelConfig, TrainingTrace, WeightMatrix};

use super::{linear_fit, mean, par_map, std_dev, write_cell, write_summary, write_svg};
use crate::config::ExperimentConfig;
use crate::error::{LabError, Result};
use crate::io::fmt_f64;
use crate::svg::{Plot, Series, Style};

#[derive(Debug, Clone)]
pub struct CollideRun {
    pub cell: String,
    pub m: usize,
    pub seed: u64,
    pub benign_at_init: usize,
    pub malign_at_init: usize,
    pub polysemantic: usize,
    pub trace: TrainingTrace,
    pub final_w: WeightMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WidthSummary {
    pub m: usize,
    pub runs: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub prediction: f64,
}

#[derive(Debug, Clone)]
pub struct CollideOutcome {
    pub runs: Vec<CollideRun>,
    pub by_width: Vec<WidthSummary>,
    /// Log-log slope of mean count against `m`, over widths with a nonzero mean.
    pub slope: f64,
}

pub fn train_cell(model: &ModelConfig, cell: &str, poly_threshold: f64) -> Result<CollideRun> {
    model.validate().map_err(|e| LabError::from_model(cell, e))?;
    let w0 = init_weights(model, &mut stream(model.seed, Stream::Init));
    let report = classify_collisions(&w0).map_err(|e| LabError::from_model(cell, e))?;
    let mut trainer = L1Trainer::new(model, w0).map_err(|e| LabError::from_model(cell, e))?;
    let mut trace = TrainingTrace::new();
    trainer.run(&mut trace).map_err(|e| LabError::from_model(cell, e))?;
    let final_w = trainer.into_weights();
    Ok(CollideRun {
        cell: cell.to_string(),
        m: model.m,
        seed: model.seed,
        benign_at_init: report.benign_count,
        malign_at_init: report.malign_count,
        polysemantic: count_polysemantic(&final_w, poly_threshold).count,
        trace,
        final_w,
    })
}

/// Trains every `(m, seed)` cell; nothing is written.
pub fn train_all(cfg: &ExperimentConfig) -> Result<CollideOutcome> {
    cfg.validate()?;
    let base = cfg.model_config();
    let cells: Vec<(usize, u64)> = cfg
        .sweep
        .m
        .iter()
        .flat_map(|&m| cfg.seeds().into_iter().map(move |s| (m, s)))
        .collect();
    let runs = par_map(cfg.workers, &cells, |&(m, seed)| {
        let cell = format!("m{m}-seed{seed}");
        train_cell(&ModelConfig { m, seed, ..base.clone() }, &cell, cfg.poly_threshold)
    })?;
    let by_width: Vec<WidthSummary> = cfg
        .sweep
        .m
        .iter()
        .map(|&m| {
            let counts: Vec<f64> = runs.iter().filter(|r| r.m == m).map(|r| r.polysemantic as f64).collect();
            WidthSummary {
                m,
                runs: counts.len(),
                mean: mean(&counts),
                std_dev: std_dev(&counts),
                prediction: expected_polysemantic(base.n, m),
            }
        })
        .collect();
    let pts: Vec<(f64, f64)> = by_width
        .iter()
        .filter(|w| w.mean > 0.0)
        .map(|w| ((w.m as f64).ln(), w.mean.ln()))
        .collect();
    let slope = if pts.len() >= 2 { linear_fit(&pts).0 } else { f64::NAN };
    Ok(CollideOutcome { runs, by_width, slope })
}

pub fn run_collide(cfg: &ExperimentConfig) -> Result<CollideOutcome> {
    let out = train_all(cfg)?;
    for run in &out.runs {
        let extra = [("cell.m", run.m.to_string()), ("cell.seed", run.seed.to_string())];
        write_cell(cfg, &run.cell, &extra, &run.trace, &run.final_w)?;
    }
    let rows: Vec<Vec<String>> = out
        .runs
        .iter()
        .map(|r| {
            vec![
                r.m.to_string(),
                r.seed.to_string(),
                r.polysemantic.to_string(),
                r.benign_at_init.to_string(),
                r.malign_at_init.to_string(),
                fmt_f64(expected_polysemantic(cfg.model.n, r.m)),
            ]
        })
        .collect();
    write_summary(
        cfg,
        "summary.csv",
        &[],
        &["m", "seed", "polysemantic", "benign_at_init", "malign_at_init", "prediction"],
        &rows,
    )?;
    let rows: Vec<Vec<String>> = out
        .by_width
        .iter()
        .map(|w| {
            vec![
                w.m.to_string(),
                w.runs.to_string(),
                fmt_f64(w.mean),
                fmt_f64(w.std_dev),
                fmt_f64(w.prediction),
                fmt_f64(w.mean / w.prediction),
            ]
        })
        .collect();
    write_summary(
        cfg,
        "summary_by_m.csv",
        &[("loglog_slope", fmt_f64(out.slope))],
        &["m", "runs", "mean", "std_dev", "prediction", "ratio"],
        &rows,
    )?;

    if cfg.emit.svg {
        let n = cfg.model.n;
        let (lo, hi) = (
            *cfg.sweep.m.iter().min().expect("validated"),
            *cfg.sweep.m.iter().max().expect("validated"),
        );
        let curve: Vec<(f64, f64)> = (0..=40)
            .map(|k| {
                let m = lo as f64 * (hi as f64 / lo as f64).powf(k as f64 / 40.0);
                (m, n as f64 * (n as f64 - 1.0) / (4.0 * m))
            })
            .collect();
        let plot = Plot::new(format!("polysemantic neurons after training, n = {n}"), "m", "polysemantic neurons")
            .log_x()
            .log_y()
            .with(Series::new("runs", out.runs.iter().map(|r| (r.m as f64, r.polysemantic as f64)).collect(), Style::Markers))
            .with(Series::new("mean", out.by_width.iter().map(|w| (w.m as f64, w.mean)).collect(), Style::Line))
            .with(Series::new("n(n-1)/4m", curve, Style::Dashed));
        write_svg(cfg, "plot.svg", &plot.render())?;
    }
    Ok(out)
}
