//! A single noisy training run shown in full: every row's `l4p4` over time
//! and the final weight matrix.

use polylab_core::analysis::feature_assignments;
use polylab_core::noisy::train_noisy;
use polylab_core::{TrainingTrace, WeightMatrix};

use super::{write_cell, write_summary, write_svg};
use crate::config::ExperimentConfig;
use crate::error::{LabError, Result};
use crate::io::fmt_f64;
use crate::svg::{heatmap, Plot, Series, Style};

#[derive(Debug, Clone, PartialEq)]
pub struct RowOutcome {
    pub row: usize,
    pub l4p4: f64,
    pub l2sq: f64,
    /// Largest-magnitude neuron, if the row is not identically zero.
    pub neuron: Option<usize>,
    /// Final `l4p4` below the compromise threshold.
    pub compromise: bool,
}

#[derive(Debug, Clone)]
pub struct InstanceOutcome {
    pub cell: String,
    pub trace: TrainingTrace,
    pub final_w: WeightMatrix,
    pub rows: Vec<RowOutcome>,
}

pub fn run_instance(cfg: &ExperimentConfig) -> Result<InstanceOutcome> {
    cfg.validate()?;
    let model = cfg.model_config();
    let cell = format!("{}-sigma{}-seed{}", cfg.noise_family.name(), super::id_num(cfg.sigma), model.seed);
    let (final_w, trace) = train_noisy(&model).map_err(|e| LabError::from_model(&cell, e))?;
    let assignments = feature_assignments(&final_w).ok();
    let rows: Vec<RowOutcome> = final_w
        .rows_iter()
        .enumerate()
        .map(|(i, r)| {
            let l4p4: f64 = r.iter().map(|x| (x * x) * (x * x)).sum();
            RowOutcome {
                row: i,
                l4p4,
                l2sq: r.iter().map(|x| x * x).sum(),
                neuron: assignments.as_ref().map(|a| a[i].neuron),
                compromise: l4p4 < cfg.compromise_threshold,
            }
        })
        .collect();

    write_cell(cfg, &cell, &[], &trace, &final_w)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.row.to_string(),
                fmt_f64(r.l4p4),
                fmt_f64(r.l2sq),
                r.neuron.map(|k| k.to_string()).unwrap_or_default(),
                r.compromise.to_string(),
            ]
        })
        .collect();
    write_summary(cfg, "summary.csv", &[("cell", cell.clone())], &["row", "final_l4p4", "final_l2sq", "neuron", "compromise"], &table)?;
    for r in rows.iter().filter(|r| r.compromise) {
        log::info!("row {} ends at l4p4 = {:.3}: candidate compromise row", r.row, r.l4p4);
    }

    if cfg.emit.svg {
        let mut plot = Plot::new(format!("per-row l4p4, {} noise sigma = {}", cfg.noise_family.name(), cfg.sigma), "t", "|W_i|_4^4");
        for i in 0..final_w.rows() {
            plot = plot.with(Series::new(format!("W{i}"), trace.row(i).map(|r| (r.t, r.l4p4)).collect(), Style::Line));
        }
        write_svg(cfg, "plot.svg", &plot.render())?;
        write_svg(cfg, "heatmap.svg", &heatmap(&final_w, "final weights (rows: features, columns: neurons)"))?;
    }
    Ok(InstanceOutcome { cell, trace, final_w, rows })
}
