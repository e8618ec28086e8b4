//! Splitting a hidden neuron in two.

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::matrix::WeightMatrix;
use crate::rng::Rng;

/// Duplicates column `k` into a new last column, scales both copies by
/// `1/sqrt(2)` and adds independent `N(0, perturb_scale^2)` noise to every
/// entry of both copies.
///
/// With tied weights the incoming and outgoing weights of a neuron are the
/// same column, and `1/sqrt(2)` is the scale that leaves every `W_i . W_j`
/// (hence the model's output) unchanged when `perturb_scale == 0`.
pub fn split_neuron(w: &WeightMatrix, k: usize, perturb_scale: f64, rng: &mut Rng) -> Result<WeightMatrix> {
    if k >= w.cols() {
        return Err(Error::ColumnOutOfRange { index: k, cols: w.cols() });
    }
    if !(perturb_scale >= 0.0 && perturb_scale.is_finite()) {
        return Err(Error::InvalidConfig("perturb_scale must be finite and >= 0"));
    }
    let scale = core::f64::consts::FRAC_1_SQRT_2;
    let mut out = w.clone();
    let mut copy = w.column(k);
    for (i, c) in copy.iter_mut().enumerate() {
        *c *= scale;
        out[(i, k)] = *c;
    }
    if perturb_scale > 0.0 {
        let normal = Normal::new(0.0, perturb_scale).expect("finite scale");
        for i in 0..w.rows() {
            out[(i, k)] += normal.sample(rng);
        }
        for c in copy.iter_mut() {
            *c += normal.sample(rng);
        }
    }
    out.push_column(&copy)?;
    Ok(out)
}
