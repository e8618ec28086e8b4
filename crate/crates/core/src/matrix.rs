//! Dense row-major `n x m` weight matrix shared by both models.

use alloc::vec::Vec;
use rand_distr::{Distribution, Normal};

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Tied encoder/decoder weights. Row `i` is the encoding of feature `i`;
/// column `k` holds hidden neuron `k`'s weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl WeightMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: alloc::vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Row `i` is the hidden basis vector `f_i`; requires `rows <= cols`.
    pub fn basis(rows: usize, cols: usize) -> Self {
        assert!(rows <= cols, "need rows <= cols for a basis embedding");
        let mut w = Self::zeros(rows, cols);
        for i in 0..rows {
            w[(i, i)] = 1.0;
        }
        w
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on a zero chunk size
        let cols = self.cols.max(1);
        self.data.chunks_exact(cols).take(self.rows)
    }

    pub fn check_row(&self, i: usize) -> Result<()> {
        if i < self.rows {
            Ok(())
        } else {
            Err(Error::RowOutOfRange {
                index: i,
                rows: self.rows,
            })
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `W_i . W_j`, summed in increasing column order.
    pub fn row_dot(&self, i: usize, j: usize) -> f64 {
        dot(self.row(i), self.row(j))
    }

    pub fn row_norm_sq(&self, i: usize) -> f64 {
        dot(self.row(i), self.row(i))
    }

    /// Full `n x n` Gram matrix `W W^T`, row-major.
    pub fn gram(&self) -> Vec<f64> {
        let n = self.rows;
        let mut g = alloc::vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let d = self.row_dot(i, j);
                g[i * n + j] = d;
                g[j * n + i] = d;
            }
        }
        g
    }

    /// `W x` for `x` of length `m`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.rows_iter().map(|r| dot(r, x)).collect()
    }

    /// `W^T y` for `y` of length `n`.
    pub fn mul_t_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.cols];
        for (r, &yi) in self.rows_iter().zip(y) {
            for (o, &w) in out.iter_mut().zip(r) {
                *o += yi * w;
            }
        }
        out
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, k)]).collect()
    }

    /// Appends a column, growing `cols` by one.
    pub fn push_column(&mut self, col: &[f64]) -> Result<()> {
        if col.len() != self.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                got: col.len(),
            });
        }
        let new_cols = self.cols + 1;
        let mut data = Vec::with_capacity(self.rows * new_cols);
        for (i, &c) in col.iter().enumerate() {
            data.extend_from_slice(self.row(i));
            data.push(c);
        }
        self.data = data;
        self.cols = new_cols;
        Ok(())
    }

    /// Right-multiplies by a `cols x cols` row-major matrix.
    pub fn mul_right(&self, r: &[f64]) -> Result<Self> {
        let m = self.cols;
        if r.len() != m * m {
            return Err(Error::DimensionMismatch {
                expected: m * m,
                got: r.len(),
            });
        }
        let mut out = Self::zeros(self.rows, m);
        for i in 0..self.rows {
            let src = self.row(i);
            let dst = out.row_mut(i);
            for (a, &w) in src.iter().enumerate() {
                for (d, &rv) in dst.iter_mut().zip(&r[a * m..(a + 1) * m]) {
                    *d += w * rv;
                }
            }
        }
        Ok(out)
    }
}

impl core::ops::Index<(usize, usize)> for WeightMatrix {
    type Output = f64;

    fn index(&self, (i, k): (usize, usize)) -> &f64 {
        assert!(k < self.cols);
        &self.data[i * self.cols + k]
    }
}

impl core::ops::IndexMut<(usize, usize)> for WeightMatrix {
    fn index_mut(&mut self, (i, k): (usize, usize)) -> &mut f64 {
        assert!(k < self.cols);
        &mut self.data[i * self.cols + k]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// i.i.d. `N(0, (init_scale/sqrt(m))^2)` entries, drawn row by row.
pub fn init_weights(config: &ModelConfig, rng: &mut Rng) -> WeightMatrix {
    let (n, m) = (config.n, config.m);
    let std = config.init_scale / libm::sqrt(m as f64);
    if std == 0.0 {
        return WeightMatrix::zeros(n, m);
    }
    let normal = Normal::new(0.0, std).expect("finite std");
    let data = (0..n * m).map(|_| normal.sample(rng)).collect();
    WeightMatrix { rows: n, cols: m, data }
}
