//! Split a polysemantic neuron of a trained l1 model in two, keep training,
//! and see whether its two features separate onto the two copies.

use polylab_core::analysis::{count_polysemantic, feature_assignments};
use polylab_core::l1::{train_l1, train_l1_from};
use polylab_core::rng::{stream, Stream};
use polylab_core::surgery::split_neuron;
use polylab_core::{ModelConfig, TrainingTrace, WeightMatrix};

use super::{par_map, write_cell, write_summary, write_svg};
use crate::config::ExperimentConfig;
use crate::error::{LabError, Result};
use crate::io::fmt_f64;
use crate::svg::{Plot, Series, Style};

#[derive(Debug, Clone)]
pub struct SplitTrial {
    pub cell: String,
    pub seed: u64,
    /// The split neuron and the two features sharing it with opposite signs.
    pub neuron: usize,
    pub features: (usize, usize),
    /// Winning neurons of the two features after retraining.
    pub after: (usize, usize),
    pub weights_after: (f64, f64),
    pub trace: TrainingTrace,
    pub final_w: WeightMatrix,
}

impl SplitTrial {
    pub fn separated(&self) -> bool {
        self.after.0 != self.after.1
    }
}

#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub trials: Vec<SplitTrial>,
    /// Seeds whose trained model had no opposite-sign polysemantic neuron.
    pub skipped: Vec<u64>,
}

impl SplitOutcome {
    pub fn separated(&self) -> usize {
        self.trials.iter().filter(|t| t.separated()).count()
    }
}

/// Trains, splits and retrains one seed; `None` if there is nothing to split.
pub fn trial(model: &ModelConfig, seed: u64, poly_threshold: f64, perturb_scale: f64) -> Result<Option<SplitTrial>> {
    let cell = format!("seed{seed}");
    let cfg = ModelConfig { seed, ..model.clone() };
    let (w, _) = train_l1(&cfg).map_err(|e| LabError::from_model(&cell, e))?;
    let pc = count_polysemantic(&w, poly_threshold);
    let candidate = pc.polysemantic().find_map(|(k, feats)| {
        let (i, j) = (feats[0], feats[1]);
        (w[(i, *k)] * w[(j, *k)] < 0.0).then_some((*k, i, j))
    });
    let Some((k, i, j)) = candidate else { return Ok(None) };
    let split = split_neuron(&w, k, perturb_scale, &mut stream(seed, Stream::Split)).map_err(|e| LabError::from_model(&cell, e))?;
    let wider = ModelConfig { m: model.m + 1, ..cfg };
    let (final_w, trace) = train_l1_from(&wider, split).map_err(|e| LabError::from_model(&cell, e))?;
    let a = feature_assignments(&final_w).map_err(|e| LabError::from_model(&cell, e))?;
    Ok(Some(SplitTrial {
        cell,
        seed,
        neuron: k,
        features: (i, j),
        after: (a[i].neuron, a[j].neuron),
        weights_after: (a[i].weight, a[j].weight),
        trace,
        final_w,
    }))
}

/// Collects `cfg.trials` trials from consecutive seeds starting at the base
/// seed. Seeds are scanned in batches, so the result does not depend on the
/// worker count.
pub fn collect_trials(cfg: &ExperimentConfig) -> Result<SplitOutcome> {
    cfg.validate()?;
    let model = cfg.model_config();
    let limit = cfg.trials as u64 * 100;
    let mut next = model.seed;
    let mut trials = Vec::new();
    let mut skipped = Vec::new();
    while trials.len() < cfg.trials {
        if next - model.seed >= limit {
            return Err(LabError::config(format!(
                "only {} of {} trials found in {limit} seeds; no splittable neuron in the rest",
                trials.len(),
                cfg.trials
            )));
        }
        let batch: Vec<u64> = (next..next + cfg.trials.max(8) as u64).collect();
        next += batch.len() as u64;
        let results = par_map(cfg.workers, &batch, |&s| trial(&model, s, cfg.poly_threshold, cfg.perturb_scale))?;
        for (seed, r) in batch.into_iter().zip(results) {
            if trials.len() == cfg.trials {
                break;
            }
            match r {
                Some(t) => trials.push(t),
                None => skipped.push(seed),
            }
        }
    }
    Ok(SplitOutcome { trials, skipped })
}

pub fn run_split_neuron(cfg: &ExperimentConfig) -> Result<SplitOutcome> {
    let out = collect_trials(cfg)?;
    let mut rows = Vec::new();
    for t in &out.trials {
        let extra = [("cell.seed", t.seed.to_string()), ("cell.split_neuron", t.neuron.to_string())];
        write_cell(cfg, &t.cell, &extra, &t.trace, &t.final_w)?;
        rows.push(vec![
            t.seed.to_string(),
            t.neuron.to_string(),
            t.features.0.to_string(),
            t.features.1.to_string(),
            t.after.0.to_string(),
            t.after.1.to_string(),
            fmt_f64(t.weights_after.0),
            fmt_f64(t.weights_after.1),
            t.separated().to_string(),
        ]);
    }
    let extra = [
        ("separated", format!("{}/{}", out.separated(), out.trials.len())),
        ("skipped_seeds", out.skipped.iter().map(u64::to_string).collect::<Vec<_>>().join(",")),
    ];
    write_summary(
        cfg,
        "summary.csv",
        &extra,
        &["seed", "neuron", "feature_i", "feature_j", "neuron_i_after", "neuron_j_after", "weight_i_after", "weight_j_after", "separated"],
        &rows,
    )?;
    if cfg.emit.svg {
        let mut hits = 0usize;
        let running: Vec<(f64, f64)> = out
            .trials
            .iter()
            .enumerate()
            .map(|(k, t)| {
                hits += usize::from(t.separated());
                ((k + 1) as f64, hits as f64 / (k + 1) as f64)
            })
            .collect();
        let len = out.trials.len() as f64;
        let plot = Plot::new("features separated after splitting their neuron", "trials", "fraction separated")
            .with(Series::new("running fraction", running, Style::Line))
            .with(Series::new("1/2", vec![(1.0, 0.5), (len.max(2.0), 0.5)], Style::Dashed));
        write_svg(cfg, "plot.svg", &plot.render())?;
    }
    Ok(out)
}
