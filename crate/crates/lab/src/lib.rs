//! Experiment harness for the polylab toy autoencoders: configuration, CSV
//! and SVG output, the batch experiments and the verification suite.

pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
pub mod svg;
pub mod verify;

use config::{Experiment, ExperimentConfig};
use error::{LabError, Result};

/// Runs the configured experiment. Verification failures surface as
/// [`LabError::ChecksFailed`].
pub fn run(cfg: &ExperimentConfig) -> Result<()> {
    match cfg.experiment {
        Experiment::Sparsify => experiments::sparsify::run_sparsify(cfg).map(drop),
        Experiment::Collide => experiments::collide::run_collide(cfg).map(drop),
        Experiment::NoiseSweep => experiments::noise_sweep::run_noise_sweep(cfg).map(drop),
        Experiment::Instance => experiments::instance::run_instance(cfg).map(drop),
        Experiment::SplitNeuron => experiments::split::run_split_neuron(cfg).map(drop),
        Experiment::Verify => {
            let report = verify::run_verify(cfg)?;
            if report.failed > 0 {
                return Err(LabError::ChecksFailed { failed: report.failed, total: report.checks.len() });
            }
            Ok(())
        }
    }
}
