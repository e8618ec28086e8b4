use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::noise::NoiseSpec;
use crate::trace::RecordSchedule;

/// Default magnitude below which an entry counts as zero.
pub const DEFAULT_EPS_ZERO: f64 = 1e-8;

/// Hyperparameters of a single training run.
///
/// Training time is `t = eta * step`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Number of features (rows of `W`).
    pub n: usize,
    /// Hidden width (columns of `W`).
    pub m: usize,
    pub lambda: f64,
    pub eta: f64,
    /// Entries start as `N(0, (init_scale / sqrt(m))^2)`.
    pub init_scale: f64,
    pub interference_enabled: bool,
    pub noise: NoiseSpec,
    pub seed: u64,
    pub steps: u64,
    pub schedule: RecordSchedule,
    pub eps_zero: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n: 8,
            m: 16,
            lambda: 0.0,
            eta: 0.01,
            init_scale: 0.9,
            interference_enabled: true,
            noise: NoiseSpec::None,
            seed: 0,
            steps: 0,
            schedule: RecordSchedule::every(1),
            eps_zero: DEFAULT_EPS_ZERO,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigWarning {
    /// `lambda > 1/sqrt(m)`: the penalty can zero whole encodings at once.
    LambdaAboveInverseSqrtM,
}

impl ModelConfig {
    /// Rejects configurations no model can run; logs soft warnings.
    pub fn validate(&self) -> Result<Vec<ConfigWarning>> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be >= 1"));
        }
        if self.m == 0 {
            return Err(Error::InvalidConfig("m must be >= 1"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig("lambda must be finite and >= 0"));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidConfig("eta must be finite and > 0"));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(Error::InvalidConfig("init_scale must be finite and >= 0"));
        }
        if self.schedule.every == 0 {
            return Err(Error::InvalidConfig("record_every must be >= 1"));
        }
        if self.eps_zero.is_nan() || self.eps_zero < 0.0 {
            return Err(Error::InvalidConfig("eps_zero must be >= 0"));
        }
        let noise_ok = match self.noise {
            NoiseSpec::None => true,
            NoiseSpec::Bipolar { sigma } | NoiseSpec::Gaussian { sigma } => {
                sigma >= 0.0 && sigma.is_finite()
            }
            NoiseSpec::Uniform { half_width } => half_width >= 0.0 && half_width.is_finite(),
        };
        if !noise_ok {
            return Err(Error::InvalidConfig("noise scale must be finite and >= 0"));
        }

        let mut warnings = Vec::new();
        if self.lambda > 1.0 / libm::sqrt(self.m as f64) {
            log::warn!(
                "lambda = {} exceeds 1/sqrt(m) = {}; encodings may die immediately",
                self.lambda,
                1.0 / libm::sqrt(self.m as f64)
            );
            warnings.push(ConfigWarning::LambdaAboveInverseSqrtM);
        }
        Ok(warnings)
    }

    /// Training time after `step` updates.
    pub fn time_at(&self, step: u64) -> f64 {
        self.eta * step as f64
    }
}
