//! Sparsity reached under hidden-layer noise of different shapes and sizes,
//! with the l1 model's response to lambda alongside.

use polylab_core::l1::train_l1;
use polylab_core::noisy::train_noisy;
use polylab_core::{ModelConfig, TrainingTrace, WeightMatrix};

use super::{id_num, mean, par_map, write_cell, write_summary, write_svg};
use crate::config::{ExperimentConfig, NoiseFamily};
use crate::error::{LabError, Result};
use crate::io::fmt_f64;
use crate::svg::{Plot, Series, Style};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepModel {
    Noise { family: NoiseFamily, sigma: f64 },
    L1 { lambda: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub model: SweepModel,
    pub seed: u64,
}

impl SweepCell {
    pub fn id(&self) -> String {
        match self.model {
            SweepModel::Noise { family, sigma } => format!("{}-sigma{}-seed{}", family.name(), id_num(sigma), self.seed),
            SweepModel::L1 { lambda } => format!("l1-lambda{}-seed{}", id_num(lambda), self.seed),
        }
    }
}

#[derive(Debug, Clone)]
pub enum CellResult {
    Done { trace: TrainingTrace, final_w: WeightMatrix },
    Diverged { step: u64 },
}

#[derive(Debug, Clone)]
pub struct SweepRun {
    pub cell: SweepCell,
    pub result: CellResult,
}

impl SweepRun {
    /// Row-averaged `l4p4` and `|W_i|^2` at the end of training.
    pub fn final_means(&self) -> Option<(f64, f64)> {
        match &self.result {
            CellResult::Done { final_w, .. } => {
                let n = final_w.rows() as f64;
                let l4 = final_w.rows_iter().map(|r| r.iter().map(|x| (x * x) * (x * x)).sum::<f64>()).sum::<f64>() / n;
                let l2 = final_w.rows_iter().map(|r| r.iter().map(|x| x * x).sum::<f64>()).sum::<f64>() / n;
                Some((l4, l2))
            }
            CellResult::Diverged { .. } => None,
        }
    }
}

/// Final mean `l4p4` over seeds for one model setting.
#[derive(Debug, Clone, PartialEq)]
pub struct SettingSummary {
    pub model: SweepModel,
    pub runs: usize,
    pub diverged: usize,
    pub mean_l4p4: f64,
    pub mean_l2sq: f64,
}

#[derive(Debug, Clone)]
pub struct NoiseSweepOutcome {
    pub runs: Vec<SweepRun>,
    pub settings: Vec<SettingSummary>,
}

pub fn cells(cfg: &ExperimentConfig) -> Vec<SweepCell> {
    let seeds = cfg.seeds();
    let mut models = Vec::new();
    for &family in &cfg.sweep.variants {
        for &sigma in &cfg.sweep.sigma {
            models.push(SweepModel::Noise { family, sigma });
        }
    }
    for &lambda in &cfg.sweep.lambda {
        models.push(SweepModel::L1 { lambda });
    }
    models
        .into_iter()
        .flat_map(|model| seeds.iter().map(move |&seed| SweepCell { model, seed }))
        .collect()
}

pub fn train_cell(base: &ModelConfig, cell: &SweepCell) -> Result<SweepRun> {
    let id = cell.id();
    let outcome = match cell.model {
        SweepModel::Noise { family, sigma } => {
            train_noisy(&ModelConfig { noise: family.spec(sigma), lambda: 0.0, seed: cell.seed, ..base.clone() })
        }
        SweepModel::L1 { lambda } => train_l1(&ModelConfig { lambda, seed: cell.seed, ..base.clone() }),
    };
    let result = match outcome {
        Ok((final_w, trace)) => CellResult::Done { trace, final_w },
        Err(e) => match LabError::from_model(&id, e) {
            LabError::Diverged { step, .. } => {
                log::warn!("{id} diverged at step {step}");
                CellResult::Diverged { step }
            }
            other => return Err(other),
        },
    };
    Ok(SweepRun { cell: *cell, result })
}

/// Trains every cell; nothing is written. Divergent cells are kept and flagged.
pub fn train_all(cfg: &ExperimentConfig) -> Result<NoiseSweepOutcome> {
    cfg.validate()?;
    let base = cfg.model_config();
    let cells = cells(cfg);
    let runs = par_map(cfg.workers, &cells, |c| train_cell(&base, c))?;
    let mut settings: Vec<SettingSummary> = Vec::new();
    for run in &runs {
        if settings.last().map(|s| s.model) != Some(run.cell.model) {
            settings.push(SettingSummary { model: run.cell.model, runs: 0, diverged: 0, mean_l4p4: 0.0, mean_l2sq: 0.0 });
        }
    }
    for s in settings.iter_mut() {
        let finals: Vec<(f64, f64)> = runs.iter().filter(|r| r.cell.model == s.model).filter_map(SweepRun::final_means).collect();
        s.runs = runs.iter().filter(|r| r.cell.model == s.model).count();
        s.diverged = s.runs - finals.len();
        s.mean_l4p4 = mean(&finals.iter().map(|f| f.0).collect::<Vec<_>>());
        s.mean_l2sq = mean(&finals.iter().map(|f| f.1).collect::<Vec<_>>());
    }
    Ok(NoiseSweepOutcome { runs, settings })
}

fn model_columns(model: SweepModel) -> [String; 4] {
    match model {
        SweepModel::Noise { family, sigma } => ["noise".into(), family.name().into(), fmt_f64(sigma), String::new()],
        SweepModel::L1 { lambda } => ["l1".into(), String::new(), String::new(), fmt_f64(lambda)],
    }
}

pub fn run_noise_sweep(cfg: &ExperimentConfig) -> Result<NoiseSweepOutcome> {
    let out = train_all(cfg)?;
    let m = cfg.model.m as f64;
    let reference = 3.0 / m;

    let mut rows = Vec::new();
    for run in &out.runs {
        let id = run.cell.id();
        if let CellResult::Done { trace, final_w } = &run.result {
            write_cell(cfg, &id, &[("cell.seed", run.cell.seed.to_string())], trace, final_w)?;
        }
        let [model, variant, sigma, lambda] = model_columns(run.cell.model);
        let (status, l4, l2) = match (&run.result, run.final_means()) {
            (CellResult::Done { .. }, Some((l4, l2))) => ("ok".to_string(), fmt_f64(l4), fmt_f64(l2)),
            (CellResult::Diverged { step }, _) => (format!("diverged@{step}"), String::new(), String::new()),
            _ => unreachable!(),
        };
        rows.push(vec![id, model, variant, sigma, lambda, run.cell.seed.to_string(), status, l4, l2]);
    }
    write_summary(
        cfg,
        "summary.csv",
        &[],
        &["cell", "model", "variant", "sigma", "lambda", "seed", "status", "final_mean_l4p4", "final_mean_l2sq"],
        &rows,
    )?;
    let rows: Vec<Vec<String>> = out
        .settings
        .iter()
        .map(|s| {
            let [model, variant, sigma, lambda] = model_columns(s.model);
            vec![
                model,
                variant,
                sigma,
                lambda,
                s.runs.to_string(),
                s.diverged.to_string(),
                fmt_f64(s.mean_l4p4),
                fmt_f64(s.mean_l2sq),
                fmt_f64(reference),
            ]
        })
        .collect();
    write_summary(
        cfg,
        "summary_by_setting.csv",
        &[],
        &["model", "variant", "sigma", "lambda", "runs", "diverged", "mean_l4p4", "mean_l2sq", "reference_3_over_m"],
        &rows,
    )?;

    if cfg.emit.svg {
        write_plots(cfg, &out, reference)?;
    }

    if let Some(run) = out.runs.iter().find(|r| matches!(r.result, CellResult::Diverged { .. })) {
        let CellResult::Diverged { step } = run.result else { unreachable!() };
        return Err(LabError::Diverged { cell: run.cell.id(), step });
    }
    Ok(out)
}

fn write_plots(cfg: &ExperimentConfig, out: &NoiseSweepOutcome, reference: f64) -> Result<()> {
    let sigmas = &cfg.sweep.sigma;
    let mut by_sigma = Plot::new("final mean l4p4 against noise scale", "sigma", "mean |W_i|_4^4").log_x();
    for &family in &cfg.sweep.variants {
        let pts = out
            .settings
            .iter()
            .filter_map(|s| match s.model {
                SweepModel::Noise { family: f, sigma } if f == family && s.runs > s.diverged => Some((sigma, s.mean_l4p4)),
                _ => None,
            })
            .collect();
        by_sigma = by_sigma.with(Series::new(family.name(), pts, Style::Line));
    }
    if let (Some(lo), Some(hi)) = (sigmas.iter().copied().reduce(f64::min), sigmas.iter().copied().reduce(f64::max)) {
        by_sigma = by_sigma.with(Series::new("3/m", vec![(lo, reference), (hi, reference)], Style::Dashed));
    }
    write_svg(cfg, "plot.svg", &by_sigma.render())?;

    let mut over_time = Plot::new("mean l4p4 during training", "t", "mean |W_i|_4^4").log_x();
    for s in out.settings.iter().filter(|s| matches!(s.model, SweepModel::Noise { .. })) {
        let traces: Vec<Vec<(f64, f64)>> = out
            .runs
            .iter()
            .filter(|r| r.cell.model == s.model)
            .filter_map(|r| match &r.result {
                CellResult::Done { trace, .. } => Some(trace.mean_over_rows(|x| x.l4p4)),
                CellResult::Diverged { .. } => None,
            })
            .collect();
        let Some(first) = traces.first() else { continue };
        let pts = (0..first.len())
            .filter(|&k| first[k].0 > 0.0)
            .map(|k| (first[k].0, mean(&traces.iter().map(|c| c[k].1).collect::<Vec<_>>())))
            .collect();
        let SweepModel::Noise { family, sigma } = s.model else { unreachable!() };
        over_time = over_time.with(Series::new(format!("{} {}", family.name(), sigma), pts, Style::Line));
    }
    write_svg(cfg, "trace_plot.svg", &over_time.render())?;

    let l1_pts: Vec<(f64, f64)> = out
        .settings
        .iter()
        .filter_map(|s| match s.model {
            SweepModel::L1 { lambda } if s.runs > s.diverged => Some((lambda, s.mean_l4p4)),
            _ => None,
        })
        .collect();
    if !l1_pts.is_empty() {
        let plot = Plot::new("final mean l4p4 against l1 penalty", "lambda", "mean |W_i|_4^4")
            .log_x()
            .with(Series::new("l1 model", l1_pts, Style::Line));
        write_svg(cfg, "lambda_plot.svg", &plot.render())?;
    }
    Ok(())
}
