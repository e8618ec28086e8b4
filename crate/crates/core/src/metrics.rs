//! Per-row sparsity metrics.

use crate::error::Result;
use crate::matrix::WeightMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowMetrics {
    pub l1: f64,
    pub l2sq: f64,
    /// `sum_k W_ik^4`.
    pub l4p4: f64,
    /// Entries with `|W_ik| > eps_zero`.
    pub nonzero_count: usize,
    /// `Var[X] / E[X]^2` for `X` uniform over the magnitudes of the counted
    /// entries; `None` when no entry is counted.
    pub relative_variance: Option<f64>,
}

pub fn row_metrics(w: &WeightMatrix, i: usize, eps_zero: f64) -> Result<RowMetrics> {
    w.check_row(i)?;
    Ok(slice_metrics(w.row(i), eps_zero))
}

/// Metrics of an arbitrary row vector.
pub fn slice_metrics(row: &[f64], eps_zero: f64) -> RowMetrics {
    let mut l1 = 0.0;
    let mut l2sq = 0.0;
    let mut l4p4 = 0.0;
    let mut count = 0usize;
    let mut nz_sum = 0.0;
    for &x in row {
        let a = x.abs();
        let sq = x * x;
        l1 += a;
        l2sq += sq;
        l4p4 += sq * sq;
        if a > eps_zero {
            count += 1;
            nz_sum += a;
        }
    }
    let relative_variance = (count > 0).then(|| {
        let mean = nz_sum / count as f64;
        let var = row
            .iter()
            .map(|x| x.abs())
            .filter(|&a| a > eps_zero)
            .map(|a| (a - mean) * (a - mean))
            .sum::<f64>()
            / count as f64;
        var / (mean * mean)
    });
    RowMetrics {
        l1,
        l2sq,
        l4p4,
        nonzero_count: count,
        relative_variance,
    }
}

/// Relative variance `Var/E^2` of a set of non-negative values.
pub fn relative_variance(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some(var / (mean * mean))
}
