//! The l1-regularized tied autoencoder.
//!
//! With basis-vector inputs the total squared error has the closed form
//!
//! ```text
//! L(W) = sum_i (1 - |W_i|^2)^2 + sum_{j != i} ReLU(W_i . W_j)^2 + lambda |W_i|_1
//! ```
//!
//! and training follows `dW_i/dt = (feature benefit) + (interference) +
//! (regularization)` with the factor 4 on the two quadratic forces dropped,
//! which is a rescaling of `lambda` and `t`. One discrete step is an explicit
//! Euler step on the two smooth forces followed by soft-thresholding every
//! entry by `eta * lambda`, so entries reach exact zero and stay there unless
//! interference pushes them back past the threshold.

use alloc::vec::Vec;

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::matrix::{init_weights, WeightMatrix};
use crate::rng::{stream, Stream};
use crate::trace::TrainingTrace;

#[inline]
fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `sign(v) * max(|v| - threshold, 0)`.
#[inline]
pub fn soft_threshold(v: f64, threshold: f64) -> f64 {
    let a = v.abs() - threshold;
    if a > 0.0 {
        libm::copysign(a, v)
    } else {
        0.0
    }
}

/// Total loss, evaluated through one Gram matrix.
pub fn loss_l1(w: &WeightMatrix, lambda: f64) -> f64 {
    let n = w.rows();
    let g = w.gram();
    let mut total = 0.0;
    for i in 0..n {
        let fb = 1.0 - g[i * n + i];
        let mut row = fb * fb;
        for j in (0..n).filter(|&j| j != i) {
            let r = relu(g[i * n + j]);
            row += r * r;
        }
        let l1: f64 = w.row(i).iter().map(|x| x.abs()).sum();
        total += row + lambda * l1;
    }
    total
}

/// The three forces acting on one encoding `W_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceDecomposition {
    /// `(1 - |W_i|^2) W_i`
    pub feature_benefit: Vec<f64>,
    /// `-sum_{j != i} ReLU(W_i . W_j) W_j`
    pub interference: Vec<f64>,
    /// `-lambda sign(W_i)`, with `sign(0) = 0`
    pub regularization: Vec<f64>,
}

impl ForceDecomposition {
    /// Sum of the three forces: the constant-4-dropped `dW_i/dt`.
    pub fn total(&self) -> Vec<f64> {
        self.feature_benefit
            .iter()
            .zip(&self.interference)
            .zip(&self.regularization)
            .map(|((a, b), c)| a + b + c)
            .collect()
    }

    /// `dL/dW_i` of [`loss_l1`], i.e. the forces with the factor 4 restored
    /// on the quadratic terms and the sign flipped.
    pub fn loss_gradient(&self) -> Vec<f64> {
        self.feature_benefit
            .iter()
            .zip(&self.interference)
            .zip(&self.regularization)
            .map(|((a, b), c)| -(4.0 * (a + b) + c))
            .collect()
    }
}

pub fn forces(w: &WeightMatrix, i: usize, lambda: f64) -> Result<ForceDecomposition> {
    w.check_row(i)?;
    let wi = w.row(i);
    let c = 1.0 - w.row_norm_sq(i);
    let feature_benefit = wi.iter().map(|x| c * x).collect();
    let mut interference = alloc::vec![0.0; w.cols()];
    for j in (0..w.rows()).filter(|&j| j != i) {
        let g = w.row_dot(i, j);
        if g > 0.0 {
            for (f, &x) in interference.iter_mut().zip(w.row(j)) {
                *f -= g * x;
            }
        }
    }
    let regularization = wi.iter().map(|&x| -lambda * sign(x)).collect();
    Ok(ForceDecomposition {
        feature_benefit,
        interference,
        regularization,
    })
}

/// One training step on the dense matrix.
///
/// All rows are updated from the same pre-step `W`. This is the reference
/// implementation; [`L1Trainer`] produces bit-identical iterates while
/// skipping exact zeros.
pub fn step_l1(w: &WeightMatrix, config: &ModelConfig) -> Result<WeightMatrix> {
    let (n, m) = (w.rows(), w.cols());
    let eta = config.eta;
    let threshold = eta * config.lambda;
    let mut out = WeightMatrix::zeros(n, m);
    let mut interference = alloc::vec![0.0; m];
    for i in 0..n {
        let wi = w.row(i);
        let c = 1.0 - w.row_norm_sq(i);
        interference.iter_mut().for_each(|f| *f = 0.0);
        if config.interference_enabled {
            for j in (0..n).filter(|&j| j != i) {
                let g = w.row_dot(i, j);
                if g > 0.0 {
                    for (f, &x) in interference.iter_mut().zip(w.row(j)) {
                        *f -= g * x;
                    }
                }
            }
        }
        for ((o, &x), &f) in out.row_mut(i).iter_mut().zip(wi).zip(&interference) {
            *o = soft_threshold(x + eta * (c * x + f), threshold);
        }
    }
    if !out.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsityThreshold {
    /// `lambda / (1 - |W_i|^2)`: entries above it grow, entries below shrink.
    pub theta: f64,
}

pub fn sparsity_threshold(w: &WeightMatrix, i: usize, lambda: f64) -> Result<SparsityThreshold> {
    w.check_row(i)?;
    let norm_sq = w.row_norm_sq(i);
    if norm_sq >= 1.0 {
        return Err(Error::ThresholdUndefined { norm_sq });
    }
    Ok(SparsityThreshold {
        theta: lambda / (1.0 - norm_sq),
    })
}

/// Stateful trainer that tracks each row's nonzero support.
///
/// Exact zeros contribute nothing to any force, so a step only touches the
/// support of every row plus the entries interference reaches. Late in
/// training, and throughout interference-free runs, that is a tiny fraction
/// of the matrix.
#[derive(Debug, Clone)]
pub struct L1Trainer {
    config: ModelConfig,
    w: WeightMatrix,
    /// Sorted nonzero columns of each row.
    support: Vec<Vec<u32>>,
    step: u64,
    acc: Vec<f64>,
    touched: Vec<bool>,
}

impl L1Trainer {
    pub fn new(config: &ModelConfig, w0: WeightMatrix) -> Result<Self> {
        if w0.rows() != config.n || w0.cols() != config.m {
            return Err(Error::DimensionMismatch {
                expected: config.n * config.m,
                got: w0.rows() * w0.cols(),
            });
        }
        let support = w0
            .rows_iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, &x)| x != 0.0)
                    .map(|(k, _)| k as u32)
                    .collect()
            })
            .collect();
        let max_abs = w0.as_slice().iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let threshold = config.eta * config.lambda;
        if threshold > 0.0 && threshold >= max_abs {
            log::warn!(
                "prox threshold eta*lambda = {threshold} >= max |W_ik| = {max_abs}; every weight dies on the first step"
            );
        }
        Ok(Self {
            config: config.clone(),
            acc: alloc::vec![0.0; w0.cols()],
            touched: alloc::vec![false; w0.cols()],
            w: w0,
            support,
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

    /// Number of exactly nonzero entries of row `i`.
    pub fn support_len(&self, i: usize) -> usize {
        self.support[i].len()
    }

    fn sparse_dot(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if self.support[i].len() <= self.support[j].len() {
            (i, j)
        } else {
            (j, i)
        };
        let (ra, rb) = (self.w.row(a), self.w.row(b));
        self.support[a]
            .iter()
            .map(|&k| ra[k as usize] * rb[k as usize])
            .sum()
    }

    fn sparse_norm_sq(&self, i: usize) -> f64 {
        let r = self.w.row(i);
        self.support[i]
            .iter()
            .map(|&k| r[k as usize] * r[k as usize])
            .sum()
    }

    /// Positive off-diagonal Gram entries, per row, in increasing partner order.
    fn positive_overlaps(&self) -> Vec<Vec<(usize, f64)>> {
        let n = self.w.rows();
        let mut pos = alloc::vec![Vec::new(); n];
        for i in 0..n {
            if self.support[i].is_empty() {
                continue;
            }
            for j in i + 1..n {
                let g = self.sparse_dot(i, j);
                if g > 0.0 {
                    pos[i].push((j, g));
                    pos[j].push((i, g));
                }
            }
        }
        for p in pos.iter_mut() {
            p.sort_unstable_by_key(|&(j, _)| j);
        }
        pos
    }

    /// [`loss_l1`] evaluated on the support.
    pub fn loss(&self) -> f64 {
        let n = self.w.rows();
        let mut total = 0.0;
        for i in 0..n {
            let fb = 1.0 - self.sparse_norm_sq(i);
            let mut row = fb * fb;
            for j in (0..n).filter(|&j| j != i) {
                if self.support[i].is_empty() {
                    break;
                }
                let r = relu(self.sparse_dot(i, j));
                row += r * r;
            }
            let r = self.w.row(i);
            let l1: f64 = self.support[i].iter().map(|&k| r[k as usize].abs()).sum();
            total += row + self.config.lambda * l1;
        }
        total
    }

    pub fn step(&mut self) -> Result<()> {
        let n = self.w.rows();
        let eta = self.config.eta;
        let threshold = eta * self.config.lambda;
        let overlaps = if self.config.interference_enabled {
            Some(self.positive_overlaps())
        } else {
            None
        };

        let mut staged: Vec<Vec<(u32, f64)>> = Vec::with_capacity(n);
        let mut candidates: Vec<u32> = Vec::new();
        for i in 0..n {
            let c = 1.0 - self.sparse_norm_sq(i);
            candidates.clear();
            candidates.extend_from_slice(&self.support[i]);
            for &k in &self.support[i] {
                self.touched[k as usize] = true;
            }
            if let Some(pos) = &overlaps {
                for &(j, g) in &pos[i] {
                    let rj = self.w.row(j);
                    for &k in &self.support[j] {
                        let k = k as usize;
                        self.acc[k] -= g * rj[k];
                        if !self.touched[k] {
                            self.touched[k] = true;
                            candidates.push(k as u32);
                        }
                    }
                }
            }
            candidates.sort_unstable();

            let wi = self.w.row(i);
            let mut row_new = Vec::with_capacity(candidates.len());
            for &k in &candidates {
                let k = k as usize;
                let x = wi[k];
                let v = soft_threshold(x + eta * (c * x + self.acc[k]), threshold);
                self.acc[k] = 0.0;
                self.touched[k] = false;
                if !v.is_finite() {
                    return Err(Error::Diverged { step: self.step + 1 });
                }
                if v != 0.0 {
                    row_new.push((k as u32, v));
                }
            }
            staged.push(row_new);
        }

        for (i, row_new) in staged.into_iter().enumerate() {
            let cols = &mut self.support[i];
            let r = self.w.row_mut(i);
            for &k in cols.iter() {
                r[k as usize] = 0.0;
            }
            cols.clear();
            for (k, v) in row_new {
                r[k as usize] = v;
                cols.push(k);
            }
        }
        self.step += 1;
        Ok(())
    }

    /// Runs to `config.steps`, recording per the schedule. Step 0 is recorded
    /// only when at least one step is taken.
    pub fn run(&mut self, trace: &mut TrainingTrace) -> Result<()> {
        let last = self.config.steps;
        if last == 0 {
            return Ok(());
        }
        let eps = self.config.eps_zero;
        while self.step <= last {
            if self.config.schedule.records(self.step, last) {
                trace.push_snapshot(self.step, self.time(), &self.w, self.loss(), eps);
            }
            if self.step == last {
                break;
            }
            self.step()?;
        }
        Ok(())
    }
}

/// Initializes from `config.seed` and trains for `config.steps` steps.
pub fn train_l1(config: &ModelConfig) -> Result<(WeightMatrix, TrainingTrace)> {
    config.validate()?;
    let w0 = init_weights(config, &mut stream(config.seed, Stream::Init));
    train_l1_from(config, w0)
}

/// Trains from a given starting matrix.
pub fn train_l1_from(config: &ModelConfig, w0: WeightMatrix) -> Result<(WeightMatrix, TrainingTrace)> {
    config.validate()?;
    let mut trainer = L1Trainer::new(config, w0)?;
    let mut trace = TrainingTrace::new();
    trainer.run(&mut trace)?;
    Ok((trainer.into_weights(), trace))
}
