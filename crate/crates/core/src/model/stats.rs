use serde::{Deserialize, Serialize};

use super::{AdaptableModel, Matrix, Trace};
use crate::{Error, Result};

/// Per-block activation moments of one batch, plus stem moments for shift
/// detection.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationStats {
    pub means: Vec<Vec<f64>>,
    pub stds: Vec<Vec<f64>>,
    /// Mean of the stem normalization output (after its affine transform).
    pub stem_mean: Vec<f64>,
    pub stem_var: Vec<f64>,
}

fn column_moments(data: &[f64], rows: usize, cols: usize) -> (Vec<f64>, Vec<f64>) {
    let mut m = RunningMoments::new(cols);
    m.push_rows(data, rows);
    (m.mean().to_vec(), m.variance())
}

impl ActivationStats {
    pub(crate) fn from_trace(trace: &Trace, rows: usize, width: usize) -> Self {
        let mut means = Vec::with_capacity(trace.blocks.len());
        let mut stds = Vec::with_capacity(trace.blocks.len());
        for block in &trace.blocks {
            let (mean, var) = column_moments(&block.output, rows, width);
            means.push(mean);
            stds.push(var.into_iter().map(f64::sqrt).collect());
        }
        let (stem_mean, stem_var) = column_moments(&trace.blocks[0].pre_activation, rows, width);
        ActivationStats {
            means,
            stds,
            stem_mean,
            stem_var,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.means
            .iter()
            .chain(&self.stds)
            .flatten()
            .chain(&self.stem_mean)
            .chain(&self.stem_var)
            .all(|x| x.is_finite())
    }
}

/// Streaming per-column mean and variance (Chan et al. pairwise merge).
#[derive(Debug, Clone, PartialEq)]
pub struct RunningMoments {
    count: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl RunningMoments {
    pub fn new(cols: usize) -> Self {
        RunningMoments {
            count: 0.0,
            mean: vec![0.0; cols],
            m2: vec![0.0; cols],
        }
    }

    pub fn count(&self) -> f64 {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Population variance.
    pub fn variance(&self) -> Vec<f64> {
        if self.count == 0.0 {
            return vec![0.0; self.mean.len()];
        }
        self.m2.iter().map(|m| (m / self.count).max(0.0)).collect()
    }

    /// Adds `rows` rows of a row-major block.
    pub fn push_rows(&mut self, data: &[f64], rows: usize) {
        if rows == 0 {
            return;
        }
        let cols = self.mean.len();
        let mut batch = RunningMoments::new(cols);
        batch.count = rows as f64;
        // Accumulate relative to the first row so constant columns stay exact.
        let pivot = &data[..cols];
        for r in 1..rows {
            for ((m, x), p) in batch
                .mean
                .iter_mut()
                .zip(&data[r * cols..(r + 1) * cols])
                .zip(pivot)
            {
                *m += x - p;
            }
        }
        for (m, p) in batch.mean.iter_mut().zip(pivot) {
            *m = p + *m / rows as f64;
        }
        for r in 0..rows {
            for ((m2, m), x) in batch
                .m2
                .iter_mut()
                .zip(&batch.mean)
                .zip(&data[r * cols..(r + 1) * cols])
            {
                *m2 += (x - m) * (x - m);
            }
        }
        self.merge(&batch);
    }

    pub fn merge(&mut self, other: &RunningMoments) {
        if other.count == 0.0 {
            return;
        }
        if self.count == 0.0 {
            *self = other.clone();
            return;
        }
        let total = self.count + other.count;
        for i in 0..self.mean.len() {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * other.count / total;
            self.m2[i] += other.m2[i] + delta * delta * self.count * other.count / total;
        }
        self.count = total;
    }
}

/// Activation statistics of in-distribution data for every block, plus the
/// stem reference moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceStats {
    pub means: Vec<Vec<f64>>,
    pub stds: Vec<Vec<f64>>,
    pub stem_mean: Vec<f64>,
    pub stem_var: Vec<f64>,
    pub sample_count: usize,
}

impl SourceStats {
    pub fn check_against(&self, model: &AdaptableModel) -> Result<()> {
        let widths = model.block_widths();
        if self.means.len() != widths.len() || self.stds.len() != widths.len() {
            return Err(Error::DimensionMismatch {
                what: "source stats blocks",
                expected: widths.len(),
                got: self.means.len().min(self.stds.len()),
            });
        }
        for ((m, s), &w) in self.means.iter().zip(&self.stds).zip(&widths) {
            if m.len() != w || s.len() != w {
                return Err(Error::DimensionMismatch {
                    what: "source stats width",
                    expected: w,
                    got: m.len().min(s.len()),
                });
            }
        }
        Ok(())
    }
}

/// Streams `batches` through the unadapted model and accumulates per-block
/// moments over every sample.
pub fn compute_source_stats<'a, I>(model: &AdaptableModel, batches: I) -> Result<SourceStats>
where
    I: IntoIterator<Item = &'a Matrix>,
{
    let width = model.arch().width;
    let mut blocks = vec![RunningMoments::new(width); model.block_count()];
    let mut stem = RunningMoments::new(width);
    for batch in batches {
        model.check_batch(batch)?;
        let trace = model.trace(None, batch);
        for (acc, block) in blocks.iter_mut().zip(&trace.blocks) {
            acc.push_rows(&block.output, batch.rows());
        }
        stem.push_rows(&trace.blocks[0].pre_activation, batch.rows());
    }
    if stem.count() == 0.0 {
        return Err(Error::invalid("no source samples"));
    }
    Ok(SourceStats {
        means: blocks.iter().map(|b| b.mean().to_vec()).collect(),
        stds: blocks
            .iter()
            .map(|b| b.variance().into_iter().map(f64::sqrt).collect())
            .collect(),
        stem_mean: stem.mean().to_vec(),
        stem_var: stem.variance(),
        sample_count: stem.count() as usize,
    })
}
