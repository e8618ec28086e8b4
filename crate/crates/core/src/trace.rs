//! Time series of per-row metrics recorded during training.

use alloc::vec::Vec;

use crate::matrix::WeightMatrix;
use crate::metrics::slice_metrics;

/// Which steps get recorded.
///
/// A step is recorded when it is a multiple of `every`, and additionally (if
/// `per_decade > 0`) when it is one of `per_decade` log-spaced steps per
/// power of ten, so log-time plots keep their early points. The final step
/// of a run is always recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecordSchedule {
    pub every: u64,
    pub per_decade: u32,
}

impl RecordSchedule {
    pub const fn every(every: u64) -> Self {
        Self {
            every,
            per_decade: 0,
        }
    }

    pub const fn log_spaced(every: u64, per_decade: u32) -> Self {
        Self { every, per_decade }
    }

    pub fn records(&self, step: u64, last: u64) -> bool {
        if step == last || step.is_multiple_of(self.every) {
            return true;
        }
        if self.per_decade == 0 || step == 0 {
            return false;
        }
        let pd = f64::from(self.per_decade);
        let j = libm::round(pd * libm::log10(step as f64));
        libm::round(libm::pow(10.0, j / pd)) as u64 == step
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub step: u64,
    pub t: f64,
    pub row: usize,
    pub l1: f64,
    pub l2sq: f64,
    pub l4p4: f64,
    pub m_prime: usize,
    /// Whole-model loss at this step; repeated on every row's record.
    pub loss: f64,
}

/// Records sorted by `(step, row)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingTrace {
    pub records: Vec<TraceRecord>,
}

impl TrainingTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    /// Appends one record per row of `w`.
    pub fn push_snapshot(&mut self, step: u64, t: f64, w: &WeightMatrix, loss: f64, eps_zero: f64) {
        for (row, r) in w.rows_iter().enumerate() {
            let m = slice_metrics(r, eps_zero);
            self.records.push(TraceRecord {
                step,
                t,
                row,
                l1: m.l1,
                l2sq: m.l2sq,
                l4p4: m.l4p4,
                m_prime: m.nonzero_count,
                loss,
            });
        }
    }

    /// Records of one row, in step order.
    pub fn row(&self, row: usize) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter().filter(move |r| r.row == row)
    }

    /// Distinct recorded steps, ascending.
    pub fn steps(&self) -> Vec<u64> {
        let mut out: Vec<u64> = Vec::new();
        for r in &self.records {
            if out.last() != Some(&r.step) {
                out.push(r.step);
            }
        }
        out
    }

    /// `(t, mean over rows of f(record))` per recorded step.
    pub fn mean_over_rows(&self, f: impl Fn(&TraceRecord) -> f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < self.records.len() {
            let step = self.records[i].step;
            let t = self.records[i].t;
            let mut acc = 0.0;
            let mut k = 0usize;
            while i < self.records.len() && self.records[i].step == step {
                acc += f(&self.records[i]);
                k += 1;
                i += 1;
            }
            out.push((t, acc / k as f64));
        }
        out
    }

    pub fn is_sorted(&self) -> bool {
        self.records
            .windows(2)
            .all(|w| (w[0].step, w[0].row) < (w[1].step, w[1].row))
    }
}
