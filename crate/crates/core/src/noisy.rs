//! The noise-regularized tied autoencoder.
//!
//! No explicit penalty; every forward pass adds i.i.d. noise `xi` to the
//! hidden layer: `y = ReLU(W (W^T x + xi))`, loss `|y - x|^2`. Training takes
//! the exact gradient through both occurrences of the tied `W`.

use alloc::vec::Vec;

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::matrix::{dot, init_weights, WeightMatrix};
use crate::noise::NoiseSpec;
use crate::rng::{stream, Rng, Stream};
use crate::trace::TrainingTrace;

#[derive(Debug, Clone, PartialEq)]
pub struct NoisyForwardRecord {
    /// Index of the basis input `e_i`.
    pub input: usize,
    pub xi: Vec<f64>,
    /// Hidden layer `W_i + xi`.
    pub h: Vec<f64>,
    /// Pre-activation `W h`.
    pub z: Vec<f64>,
    pub y: Vec<f64>,
    pub loss: f64,
}

fn check_dims(w: &WeightMatrix, i: usize, xi: &[f64]) -> Result<()> {
    w.check_row(i)?;
    if xi.len() != w.cols() {
        return Err(Error::DimensionMismatch {
            expected: w.cols(),
            got: xi.len(),
        });
    }
    Ok(())
}

pub fn forward_noisy(w: &WeightMatrix, i: usize, xi: &[f64]) -> Result<NoisyForwardRecord> {
    check_dims(w, i, xi)?;
    let h: Vec<f64> = w.row(i).iter().zip(xi).map(|(a, b)| a + b).collect();
    let z = w.mul_vec(&h);
    let y: Vec<f64> = z.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
    let loss = y
        .iter()
        .enumerate()
        .map(|(j, &v)| {
            let e = v - if j == i { 1.0 } else { 0.0 };
            e * e
        })
        .sum();
    Ok(NoisyForwardRecord {
        input: i,
        xi: xi.to_vec(),
        h,
        z,
        y,
        loss,
    })
}

/// `dL/dW` for input `e_i` and noise `xi`.
///
/// With `g_j = 2 (y_j - x_j) [z_j > 0]` this is `g h^T + x (W^T g)^T`.
pub fn grad_noisy(w: &WeightMatrix, i: usize, xi: &[f64]) -> Result<WeightMatrix> {
    let fwd = forward_noisy(w, i, xi)?;
    let mut grad = WeightMatrix::zeros(w.rows(), w.cols());
    accumulate_grad(w, &fwd, &mut grad);
    Ok(grad)
}

fn output_error(fwd: &NoisyForwardRecord) -> Vec<f64> {
    fwd.z
        .iter()
        .zip(&fwd.y)
        .enumerate()
        .map(|(j, (&z, &y))| {
            if z > 0.0 {
                2.0 * (y - if j == fwd.input { 1.0 } else { 0.0 })
            } else {
                0.0
            }
        })
        .collect()
}

fn accumulate_grad(w: &WeightMatrix, fwd: &NoisyForwardRecord, grad: &mut WeightMatrix) {
    let g = output_error(fwd);
    for (j, &gj) in g.iter().enumerate() {
        if gj != 0.0 {
            for (o, &hk) in grad.row_mut(j).iter_mut().zip(&fwd.h) {
                *o += gj * hk;
            }
        }
    }
    let back = w.mul_t_vec(&g);
    for (o, b) in grad.row_mut(fwd.input).iter_mut().zip(back) {
        *o += b;
    }
}

/// Noiseless loss summed over all basis inputs.
pub fn clean_loss(w: &WeightMatrix) -> f64 {
    let zero = alloc::vec![0.0; w.cols()];
    (0..w.rows())
        .map(|i| forward_noisy(w, i, &zero).map(|r| r.loss).unwrap_or(f64::NAN))
        .sum()
}

/// Full-pass gradient descent with fresh noise for every input.
#[derive(Debug, Clone)]
pub struct NoisyTrainer {
    config: ModelConfig,
    w: WeightMatrix,
    rng: Rng,
    step: u64,
    xi: Vec<f64>,
}

impl NoisyTrainer {
    pub fn new(config: &ModelConfig, w0: WeightMatrix) -> Result<Self> {
        if w0.rows() != config.n || w0.cols() != config.m {
            return Err(Error::DimensionMismatch {
                expected: config.n * config.m,
                got: w0.rows() * w0.cols(),
            });
        }
        Ok(Self {
            config: config.clone(),
            rng: stream(config.seed, Stream::Noise),
            xi: alloc::vec![0.0; w0.cols()],
            w: w0,
            step: 0,
        })
    }

    pub fn weights(&self) -> &WeightMatrix {
        &self.w
    }

    pub fn into_weights(self) -> WeightMatrix {
        self.w
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.config.time_at(self.step)
    }

    /// One update; returns the summed noisy loss of the pass.
    pub fn step(&mut self) -> Result<f64> {
        let mut grad = WeightMatrix::zeros(self.w.rows(), self.w.cols());
        let mut loss = 0.0;
        for i in 0..self.w.rows() {
            self.config.noise.fill(&mut self.rng, &mut self.xi);
            let fwd = forward_noisy(&self.w, i, &self.xi)?;
            loss += fwd.loss;
            accumulate_grad(&self.w, &fwd, &mut grad);
        }
        let eta = self.config.eta;
        for (x, g) in self.w.as_mut_slice().iter_mut().zip(grad.as_slice()) {
            *x -= eta * g;
        }
        self.step += 1;
        if !self.w.is_finite() {
            return Err(Error::Diverged { step: self.step });
        }
        Ok(loss)
    }

    /// Runs to `config.steps`. Recorded losses are noiseless so that tracing
    /// never draws from the noise stream.
    pub fn run(&mut self, trace: &mut TrainingTrace) -> Result<()> {
        let last = self.config.steps;
        if last == 0 {
            return Ok(());
        }
        let eps = self.config.eps_zero;
        while self.step <= last {
            if self.config.schedule.records(self.step, last) {
                trace.push_snapshot(self.step, self.time(), &self.w, clean_loss(&self.w), eps);
            }
            if self.step == last {
                break;
            }
            self.step()?;
        }
        Ok(())
    }
}

fn check_noisy_config(config: &ModelConfig) -> Result<()> {
    config.validate()?;
    if config.lambda != 0.0 {
        return Err(Error::InvalidConfig("the noise model takes no l1 penalty; set lambda = 0"));
    }
    Ok(())
}

pub fn train_noisy(config: &ModelConfig) -> Result<(WeightMatrix, TrainingTrace)> {
    check_noisy_config(config)?;
    let w0 = init_weights(config, &mut stream(config.seed, Stream::Init));
    train_noisy_from(config, w0)
}

pub fn train_noisy_from(config: &ModelConfig, w0: WeightMatrix) -> Result<(WeightMatrix, TrainingTrace)> {
    check_noisy_config(config)?;
    let mut trainer = NoisyTrainer::new(config, w0)?;
    let mut trace = TrainingTrace::new();
    trainer.run(&mut trace)?;
    Ok((trainer.into_weights(), trace))
}

fn norms(row: &[f64]) -> (f64, f64) {
    let l2sq = dot(row, row);
    let l4p4 = row.iter().map(|x| (x * x) * (x * x)).sum();
    (l2sq, l4p4)
}

/// `E[(W_i . xi)^4] = 3 sigma^4 |W_i|_2^4 + |W_i|_4^4 (mu4 - 3 sigma^4)`.
pub fn analytic_fourth_moment(row: &[f64], spec: &NoiseSpec) -> f64 {
    let (l2sq, l4p4) = norms(row);
    let s4 = spec.variance() * spec.variance();
    3.0 * s4 * l2sq * l2sq + l4p4 * (spec.fourth_moment() - 3.0 * s4)
}

/// `E[(W_i . xi)^2 |xi|^2] = |W_i|_2^2 (mu4 + (m - 1) sigma^4)`, `m = row.len()`.
pub fn analytic_cross_moment(row: &[f64], spec: &NoiseSpec) -> f64 {
    let (l2sq, _) = norms(row);
    let s4 = spec.variance() * spec.variance();
    l2sq * (spec.fourth_moment() + (row.len() as f64 - 1.0) * s4)
}

/// The kurtosis-dependent part of the expected next-step loss,
/// `16 eta^2 sigma^4 |W_i|_4^4 kappa`. Negative kurtosis makes it decrease as
/// the row concentrates.
pub fn implicit_reg_term(row: &[f64], spec: &NoiseSpec, eta: f64) -> f64 {
    let (_, l4p4) = norms(row);
    let s4 = spec.variance() * spec.variance();
    16.0 * eta * eta * s4 * l4p4 * spec.excess_kurtosis()
}
