//! Hidden-layer noise distributions with closed-form moments.

use alloc::vec::Vec;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::rng::Rng;

/// Symmetric, mean-zero noise added to every hidden unit.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum NoiseSpec {
    #[default]
    None,
    /// `+sigma` or `-sigma` with equal probability.
    Bipolar { sigma: f64 },
    Gaussian { sigma: f64 },
    /// Uniform on `[-half_width, half_width]`.
    Uniform { half_width: f64 },
}

impl NoiseSpec {
    /// Uniform noise with the given standard deviation.
    pub fn uniform_with_sigma(sigma: f64) -> Self {
        NoiseSpec::Uniform {
            half_width: sigma * libm::sqrt(3.0),
        }
    }

    /// Same family, rescaled to standard deviation `sigma`.
    pub fn with_sigma(self, sigma: f64) -> Self {
        match self {
            NoiseSpec::None => NoiseSpec::None,
            NoiseSpec::Bipolar { .. } => NoiseSpec::Bipolar { sigma },
            NoiseSpec::Gaussian { .. } => NoiseSpec::Gaussian { sigma },
            NoiseSpec::Uniform { .. } => NoiseSpec::uniform_with_sigma(sigma),
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, NoiseSpec::None)
    }

    pub fn name(&self) -> &'static str {
        match self {
            NoiseSpec::None => "none",
            NoiseSpec::Bipolar { .. } => "bipolar",
            NoiseSpec::Gaussian { .. } => "gaussian",
            NoiseSpec::Uniform { .. } => "uniform",
        }
    }

    pub fn sigma(&self) -> f64 {
        libm::sqrt(self.variance())
    }

    pub fn variance(&self) -> f64 {
        match *self {
            NoiseSpec::None => 0.0,
            NoiseSpec::Bipolar { sigma } | NoiseSpec::Gaussian { sigma } => sigma * sigma,
            NoiseSpec::Uniform { half_width: a } => a * a / 3.0,
        }
    }

    /// Fourth central moment.
    pub fn fourth_moment(&self) -> f64 {
        match *self {
            NoiseSpec::None => 0.0,
            NoiseSpec::Bipolar { sigma } => sigma * sigma * sigma * sigma,
            NoiseSpec::Gaussian { sigma } => 3.0 * sigma * sigma * sigma * sigma,
            NoiseSpec::Uniform { half_width: a } => a * a * a * a / 5.0,
        }
    }

    /// `mu4 / sigma^4 - 3`, stored per family rather than divided out so the
    /// values are exact. Zero for `None`.
    pub fn excess_kurtosis(&self) -> f64 {
        match self {
            NoiseSpec::None | NoiseSpec::Gaussian { .. } => 0.0,
            NoiseSpec::Bipolar { .. } => -2.0,
            NoiseSpec::Uniform { .. } => -1.2,
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        match *self {
            NoiseSpec::None => 0.0,
            NoiseSpec::Bipolar { sigma } => {
                if rng.random::<bool>() {
                    sigma
                } else {
                    -sigma
                }
            }
            NoiseSpec::Gaussian { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                sigma * z
            }
            NoiseSpec::Uniform { half_width } => rng.random_range(-half_width..=half_width),
        }
    }

    /// Fills `out` with i.i.d. draws.
    pub fn fill(&self, rng: &mut Rng, out: &mut [f64]) {
        if self.is_none() {
            out.iter_mut().for_each(|x| *x = 0.0);
            return;
        }
        for x in out.iter_mut() {
            *x = self.sample(rng);
        }
    }
}

/// `m` i.i.d. draws from `spec`; the zero vector for [`NoiseSpec::None`].
pub fn sample_noise(spec: &NoiseSpec, m: usize, rng: &mut Rng) -> Vec<f64> {
    let mut out = alloc::vec![0.0; m];
    spec.fill(rng, &mut out);
    out
}
