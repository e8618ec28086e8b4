//! Initialization collisions, polysemanticity counts, and the closed-form
//! sparsification curves for interference-free l1 training.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::WeightMatrix;
use crate::metrics::relative_variance;

/// Winning neuron of one feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureAssignment {
    pub feature: usize,
    /// `argmax_k |W_ik|`, ties to the lowest `k`.
    pub neuron: usize,
    pub weight: f64,
    /// `W_{i,k_i}^2 / |W_i|^2`, in `(0, 1]`.
    pub dominance: f64,
}

pub fn feature_assignments(w: &WeightMatrix) -> Result<Vec<FeatureAssignment>> {
    w.rows_iter()
        .enumerate()
        .map(|(i, row)| {
            let mut best = 0;
            for (k, x) in row.iter().enumerate() {
                if x.abs() > row[best].abs() {
                    best = k;
                }
            }
            let weight = row.get(best).copied().unwrap_or(0.0);
            if weight == 0.0 {
                return Err(Error::ZeroRow { row: i });
            }
            let norm_sq: f64 = row.iter().map(|x| x * x).sum();
            Ok(FeatureAssignment {
                feature: i,
                neuron: best,
                weight,
                dominance: weight * weight / norm_sq,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CollisionKind {
    /// Opposite signs on the shared neuron: `ReLU` hides the overlap.
    Benign,
    /// Same sign: interference pushes at least one feature off the neuron.
    Malign,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Collision {
    pub i: usize,
    pub j: usize,
    pub neuron: usize,
    pub kind: CollisionKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionReport {
    /// One entry per colliding pair `i < j`; a k-way collision lists all
    /// `k (k - 1) / 2` pairs.
    pub collisions: Vec<Collision>,
    pub benign_count: usize,
    pub malign_count: usize,
    /// `n (n - 1) / (4 m)`.
    pub expected_polysemantic: f64,
}

/// Expected number of pairs sharing an argmax neuron under i.i.d. init.
pub fn expected_collisions(n: usize, m: usize) -> f64 {
    (n as f64) * (n as f64 - 1.0) / (2.0 * m as f64)
}

/// Expected number of benign collisions, each of which becomes a
/// polysemantic neuron.
pub fn expected_polysemantic(n: usize, m: usize) -> f64 {
    expected_collisions(n, m) / 2.0
}

pub fn classify_collisions(w_init: &WeightMatrix) -> Result<CollisionReport> {
    let assign = feature_assignments(w_init)?;
    let mut collisions = Vec::new();
    for (a, fa) in assign.iter().enumerate() {
        for fb in &assign[a + 1..] {
            if fa.neuron == fb.neuron {
                let kind = if (fa.weight > 0.0) != (fb.weight > 0.0) {
                    CollisionKind::Benign
                } else {
                    CollisionKind::Malign
                };
                collisions.push(Collision {
                    i: fa.feature,
                    j: fb.feature,
                    neuron: fa.neuron,
                    kind,
                });
            }
        }
    }
    let benign_count = collisions
        .iter()
        .filter(|c| c.kind == CollisionKind::Benign)
        .count();
    Ok(CollisionReport {
        malign_count: collisions.len() - benign_count,
        benign_count,
        collisions,
        expected_polysemantic: expected_polysemantic(w_init.rows(), w_init.cols()),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolysemanticCount {
    /// Neurons carrying at least two features.
    pub count: usize,
    /// `(neuron, features)` for every neuron carrying at least one feature.
    pub neurons: Vec<(usize, Vec<usize>)>,
}

impl PolysemanticCount {
    pub fn polysemantic(&self) -> impl Iterator<Item = &(usize, Vec<usize>)> {
        self.neurons.iter().filter(|(_, f)| f.len() >= 2)
    }
}

/// A neuron is polysemantic when at least two features have
/// `|W_ik| >= weight_threshold` on it.
pub fn count_polysemantic(w: &WeightMatrix, weight_threshold: f64) -> PolysemanticCount {
    let mut neurons = Vec::new();
    for k in 0..w.cols() {
        let features: Vec<usize> = (0..w.rows())
            .filter(|&i| w[(i, k)].abs() >= weight_threshold)
            .collect();
        if !features.is_empty() {
            neurons.push((k, features));
        }
    }
    PolysemanticCount {
        count: neurons.iter().filter(|(_, f)| f.len() >= 2).count(),
        neurons,
    }
}

/// Predicted `|W_i|_1` at training time `t` without interference, with all
/// hidden constants set to 1: `sqrt(m)` until `1/(lambda sqrt m)`, then
/// `1/(lambda t)` until `1/lambda`, then 1.
pub fn predicted_l1(t: f64, m: usize, lambda: f64) -> f64 {
    let sqrt_m = libm::sqrt(m as f64);
    if lambda * t * sqrt_m <= 1.0 {
        sqrt_m
    } else if lambda * t >= 1.0 {
        1.0
    } else {
        1.0 / (lambda * t)
    }
}

/// Predicted number of nonzero entries, `predicted_l1^2`.
pub fn predicted_m_prime(t: f64, m: usize, lambda: f64) -> f64 {
    let l1 = predicted_l1(t, m, lambda);
    l1 * l1
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineFit {
    pub offset: f64,
    pub scale: f64,
    pub max_residual: f64,
    pub survivors: usize,
}

/// Least-squares fit of `|row_at_t| ~ offset + scale * |row_initial|` over
/// the entries still larger than `eps_zero` at `t`.
pub fn affine_spacing_fit(row_initial: &[f64], row_at_t: &[f64], eps_zero: f64) -> Result<AffineFit> {
    if row_initial.len() != row_at_t.len() {
        return Err(Error::DimensionMismatch {
            expected: row_initial.len(),
            got: row_at_t.len(),
        });
    }
    let pts: Vec<(f64, f64)> = row_initial
        .iter()
        .zip(row_at_t)
        .filter(|(_, y)| y.abs() > eps_zero)
        .map(|(x, y)| (x.abs(), y.abs()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::TooFewSurvivors { survivors: pts.len() });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    // All survivors started equal: any scale fits, report the flat one.
    let scale = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let offset = my - scale * mx;
    let max_residual = pts
        .iter()
        .map(|&(x, y)| (y - offset - scale * x).abs())
        .fold(0.0, f64::max);
    Ok(AffineFit {
        offset,
        scale,
        max_residual,
        survivors: pts.len(),
    })
}

fn shifted_relative_variance(top: &[f64], shift: f64) -> f64 {
    let vals: Vec<f64> = top.iter().map(|v| v - shift).collect();
    match relative_variance(&vals) {
        Some(r) if r.is_finite() => r,
        // A single value, or all values equal after the shift.
        _ => 0.0,
    }
}

/// Bracket on the relative variance of the surviving magnitudes when exactly
/// `m_prime` entries of a row remain under interference-free l1 training.
///
/// Survivors are always an affine image of the `m_prime` largest initial
/// magnitudes, i.e. those magnitudes translated down by some shift between
/// the `(m_prime + 1)`-th and the `m_prime`-th largest value. Relative
/// variance grows with the shift, so the two extreme shifts give
/// `(low, high)`. For `m_prime == len` the low end uses shift 0.
pub fn relative_variance_bounds(row_initial: &[f64], m_prime: usize) -> Result<(f64, f64)> {
    let len = row_initial.len();
    if m_prime == 0 || m_prime > len {
        return Err(Error::InvalidConfig("m_prime must lie in 1..=row length"));
    }
    let mut mags: Vec<f64> = row_initial.iter().map(|x| x.abs()).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    let top = &mags[..m_prime];
    let low_shift = mags.get(m_prime).copied().unwrap_or(0.0);
    let high_shift = mags[m_prime - 1];
    Ok((
        shifted_relative_variance(top, low_shift),
        shifted_relative_variance(top, high_shift),
    ))
}
