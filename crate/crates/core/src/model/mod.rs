//! Forward-only toy classifiers with offsettable normalization layers.
//!
//! Every block is `Linear -> LayerNorm(scale, bias) -> ReLU`; in the residual
//! architecture blocks after the stem add their input back. The model never
//! mutates its weights at test time: the normalization offsets are passed to
//! each [`AdaptableModel::forward`] call.

mod stats;
mod train;

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use stats::{compute_source_stats, ActivationStats, RunningMoments, SourceStats};
pub use train::{accuracy, pretrain, TrainConfig, TrainReport};

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

pub(crate) const LN_EPS: f64 = 1e-5;

/// Dense row-major matrix, used for input batches and probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                what: "matrix data",
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    what: "matrix row",
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    /// Rows selected by `indices`, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// Index of the largest entry in each row.
    pub fn argmax_rows(&self) -> Vec<usize> {
        self.iter_rows()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (i, &v)| {
                        if v > best.1 {
                            (i, v)
                        } else {
                            best
                        }
                    })
                    .0
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchKind {
    Mlp,
    Residual,
}

/// Architecture of a toy classifier. `blocks` counts the stem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub kind: ArchKind,
    pub input_dim: usize,
    pub width: usize,
    pub blocks: usize,
    pub classes: usize,
}

impl ArchConfig {
    /// `input -> [64, 64] -> classes`.
    pub fn mlp(input_dim: usize, classes: usize) -> Self {
        ArchConfig {
            kind: ArchKind::Mlp,
            input_dim,
            width: 64,
            blocks: 2,
            classes,
        }
    }

    /// Stem plus three residual blocks of width 64.
    pub fn residual(input_dim: usize, classes: usize) -> Self {
        ArchConfig {
            kind: ArchKind::Residual,
            input_dim,
            width: 64,
            blocks: 4,
            classes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.width == 0 || self.classes < 2 {
            return Err(Error::invalid(format!("degenerate architecture {self:?}")));
        }
        if self.blocks < 2 {
            return Err(Error::invalid(
                "at least two blocks are needed (the stem is never adapted)",
            ));
        }
        Ok(())
    }

    /// Blocks whose normalization parameters are adapted: the stem and the
    /// last block stay frozen; with only two blocks just the stem is frozen.
    pub fn adaptable_blocks(&self) -> Range<usize> {
        if self.blocks >= 3 {
            1..self.blocks - 1
        } else {
            1..self.blocks
        }
    }

    fn block_input_dim(&self, block: usize) -> usize {
        if block == 0 {
            self.input_dim
        } else {
            self.width
        }
    }

    fn is_residual(&self, block: usize) -> bool {
        self.kind == ArchKind::Residual && block > 0
    }

    pub fn weight_count(&self) -> usize {
        let blocks: usize = (0..self.blocks)
            .map(|b| self.width * self.block_input_dim(b) + 3 * self.width)
            .sum();
        blocks + self.classes * self.width + self.classes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamRole {
    Scale,
    Bias,
}

/// Where a normalization parameter vector lives inside the offset vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormSlot {
    pub block: usize,
    pub role: ParamRole,
    pub offset: usize,
    pub len: usize,
}

impl NormSlot {
    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct BlockWeights {
    pub(crate) weight: Vec<f64>, // width x input, row-major
    pub(crate) bias: Vec<f64>,
    pub(crate) scale: Vec<f64>,
    pub(crate) shift: Vec<f64>,
}

/// Output of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub probs: Matrix,
    pub stats: ActivationStats,
    /// Set when any activation or probability came out NaN or infinite.
    pub non_finite: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptableModel {
    arch: ArchConfig,
    pub(crate) blocks: Vec<BlockWeights>,
    pub(crate) head_weight: Vec<f64>, // classes x width
    pub(crate) head_bias: Vec<f64>,
    layout: Vec<NormSlot>,
}

pub(crate) struct BlockTrace {
    pub(crate) input: Vec<f64>,
    pub(crate) normalized: Vec<f64>,
    pub(crate) inv_std: Vec<f64>,
    pub(crate) pre_activation: Vec<f64>,
    pub(crate) output: Vec<f64>,
}

pub(crate) struct Trace {
    pub(crate) blocks: Vec<BlockTrace>,
    pub(crate) logits: Vec<f64>,
}

fn norm_layout(arch: &ArchConfig) -> Vec<NormSlot> {
    let mut layout = Vec::new();
    let mut offset = 0;
    for block in arch.adaptable_blocks() {
        for role in [ParamRole::Scale, ParamRole::Bias] {
            layout.push(NormSlot {
                block,
                role,
                offset,
                len: arch.width,
            });
            offset += arch.width;
        }
    }
    layout
}

impl AdaptableModel {
    /// Randomly initialized model (He-normal linear weights, unit norm scale).
    pub fn init(arch: ArchConfig, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let blocks = (0..arch.blocks)
            .map(|b| {
                let fan_in = arch.block_input_dim(b);
                let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("finite std");
                BlockWeights {
                    weight: (0..arch.width * fan_in)
                        .map(|_| normal.sample(&mut rng))
                        .collect(),
                    bias: vec![0.0; arch.width],
                    scale: vec![1.0; arch.width],
                    shift: vec![0.0; arch.width],
                }
            })
            .collect();
        let normal = Normal::new(0.0, (1.0 / arch.width as f64).sqrt()).expect("finite std");
        let head_weight = (0..arch.classes * arch.width)
            .map(|_| normal.sample(&mut rng))
            .collect();
        Ok(AdaptableModel {
            arch,
            blocks,
            head_weight,
            head_bias: vec![0.0; arch.classes],
            layout: norm_layout(&arch),
        })
    }

    pub fn arch(&self) -> &ArchConfig {
        &self.arch
    }

    /// Total length `D` of the adaptable normalization parameters.
    pub fn offset_dim(&self) -> usize {
        self.layout.iter().map(|s| s.len).sum()
    }

    pub fn norm_layout(&self) -> &[NormSlot] {
        &self.layout
    }

    /// Number of blocks contributing activation statistics (`L`).
    pub fn block_count(&self) -> usize {
        self.arch.blocks
    }

    pub fn class_count(&self) -> usize {
        self.arch.classes
    }

    /// Dimensionality of the stem statistics used for shift detection.
    pub fn stem_dim(&self) -> usize {
        self.arch.width
    }

    /// Widths of each block output, in order.
    pub fn block_widths(&self) -> Vec<usize> {
        vec![self.arch.width; self.arch.blocks]
    }

    /// Current value of every adaptable normalization parameter, laid out
    /// like the offset vector.
    pub fn base_norm_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.offset_dim());
        for slot in &self.layout {
            let block = &self.blocks[slot.block];
            match slot.role {
                ParamRole::Scale => out.extend_from_slice(&block.scale),
                ParamRole::Bias => out.extend_from_slice(&block.shift),
            }
        }
        out
    }

    /// Class probabilities and activation statistics of `f_{theta + offset}(batch)`.
    pub fn forward(&self, offset: &[f64], batch: &Matrix) -> Result<ForwardOutput> {
        if offset.len() != self.offset_dim() {
            return Err(Error::DimensionMismatch {
                what: "normalization offset",
                expected: self.offset_dim(),
                got: offset.len(),
            });
        }
        self.check_batch(batch)?;
        let trace = self.trace(Some(offset), batch);
        let rows = batch.rows();
        let probs = softmax_rows(&trace.logits, rows, self.arch.classes);
        let stats = ActivationStats::from_trace(&trace, rows, self.arch.width);
        let non_finite = !probs.as_slice().iter().all(|x| x.is_finite()) || !stats.is_finite();
        Ok(ForwardOutput {
            probs,
            stats,
            non_finite,
        })
    }

    pub(crate) fn check_batch(&self, batch: &Matrix) -> Result<()> {
        if batch.rows() == 0 {
            return Err(Error::invalid("empty batch"));
        }
        if batch.cols() != self.arch.input_dim {
            return Err(Error::DimensionMismatch {
                what: "batch features",
                expected: self.arch.input_dim,
                got: batch.cols(),
            });
        }
        if batch.as_slice().iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("input batch"));
        }
        Ok(())
    }

    /// Full forward pass keeping every intermediate needed for statistics
    /// and for backpropagation during pre-training.
    pub(crate) fn trace(&self, offset: Option<&[f64]>, batch: &Matrix) -> Trace {
        let rows = batch.rows();
        let width = self.arch.width;
        let mut current = batch.as_slice().to_vec();
        let mut traces = Vec::with_capacity(self.arch.blocks);

        for (b, weights) in self.blocks.iter().enumerate() {
            let fan_in = self.arch.block_input_dim(b);
            let (scale, shift) = self.effective_norm(b, offset);

            let mut z = vec![0.0; rows * width];
            for r in 0..rows {
                let x = &current[r * fan_in..(r + 1) * fan_in];
                let zr = &mut z[r * width..(r + 1) * width];
                for (o, zo) in zr.iter_mut().enumerate() {
                    let w = &weights.weight[o * fan_in..(o + 1) * fan_in];
                    *zo = weights.bias[o] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                }
            }

            let mut normalized = vec![0.0; rows * width];
            let mut inv_std = vec![0.0; rows];
            let mut pre_activation = vec![0.0; rows * width];
            let mut output = vec![0.0; rows * width];
            for r in 0..rows {
                let zr = &z[r * width..(r + 1) * width];
                let mean = zr.iter().sum::<f64>() / width as f64;
                let var = zr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / width as f64;
                let is = 1.0 / (var + LN_EPS).sqrt();
                inv_std[r] = is;
                for j in 0..width {
                    let k = r * width + j;
                    let xhat = (zr[j] - mean) * is;
                    normalized[k] = xhat;
                    let a = scale[j] * xhat + shift[j];
                    pre_activation[k] = a;
                    let act = a.max(0.0);
                    output[k] = if self.arch.is_residual(b) {
                        current[k] + act
                    } else {
                        act
                    };
                }
            }
            traces.push(BlockTrace {
                input: std::mem::replace(&mut current, output.clone()),
                normalized,
                inv_std,
                pre_activation,
                output,
            });
        }

        let classes = self.arch.classes;
        let mut logits = vec![0.0; rows * classes];
        for r in 0..rows {
            let h = &current[r * width..(r + 1) * width];
            for c in 0..classes {
                let w = &self.head_weight[c * width..(c + 1) * width];
                logits[r * classes + c] =
                    self.head_bias[c] + w.iter().zip(h).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        Trace {
            blocks: traces,
            logits,
        }
    }

    fn effective_norm(&self, block: usize, offset: Option<&[f64]>) -> (Vec<f64>, Vec<f64>) {
        let weights = &self.blocks[block];
        let mut scale = weights.scale.clone();
        let mut shift = weights.shift.clone();
        if let Some(offset) = offset {
            for slot in self.layout.iter().filter(|s| s.block == block) {
                let target = match slot.role {
                    ParamRole::Scale => &mut scale,
                    ParamRole::Bias => &mut shift,
                };
                for (t, o) in target.iter_mut().zip(&offset[slot.range()]) {
                    *t += o;
                }
            }
        }
        (scale, shift)
    }

    /// Flat weight vector: per block `(weight, bias, scale, shift)`, then the head.
    pub fn flat_weights(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.arch.weight_count());
        for b in &self.blocks {
            out.extend_from_slice(&b.weight);
            out.extend_from_slice(&b.bias);
            out.extend_from_slice(&b.scale);
            out.extend_from_slice(&b.shift);
        }
        out.extend_from_slice(&self.head_weight);
        out.extend_from_slice(&self.head_bias);
        out
    }

    pub fn from_flat_weights(arch: ArchConfig, weights: &[f64]) -> Result<Self> {
        arch.validate()?;
        if weights.len() != arch.weight_count() {
            return Err(Error::DimensionMismatch {
                what: "flat weights",
                expected: arch.weight_count(),
                got: weights.len(),
            });
        }
        let mut rest = weights;
        let mut take = |n: usize| {
            let (head, tail) = rest.split_at(n);
            rest = tail;
            head.to_vec()
        };
        let blocks = (0..arch.blocks)
            .map(|b| BlockWeights {
                weight: take(arch.width * arch.block_input_dim(b)),
                bias: take(arch.width),
                scale: take(arch.width),
                shift: take(arch.width),
            })
            .collect();
        let head_weight = take(arch.classes * arch.width);
        let head_bias = take(arch.classes);
        Ok(AdaptableModel {
            arch,
            blocks,
            head_weight,
            head_bias,
            layout: norm_layout(&arch),
        })
    }
}

pub(crate) fn softmax_rows(logits: &[f64], rows: usize, classes: usize) -> Matrix {
    let mut data = vec![0.0; rows * classes];
    for r in 0..rows {
        let l = &logits[r * classes..(r + 1) * classes];
        let max = l.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let out = &mut data[r * classes..(r + 1) * classes];
        let mut total = 0.0;
        for (o, &v) in out.iter_mut().zip(l) {
            *o = (v - max).exp();
            total += *o;
        }
        for o in out.iter_mut() {
            *o /= total;
        }
    }
    Matrix {
        rows,
        cols: classes,
        data,
    }
}

/// Model checkpoint: architecture, flat weights and optional source statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub schema_version: u32,
    pub arch: ArchConfig,
    pub weights: Vec<f64>,
    pub source_stats: Option<SourceStats>,
}

impl ModelCheckpoint {
    pub fn new(model: &AdaptableModel, source_stats: Option<SourceStats>) -> Self {
        ModelCheckpoint {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            arch: model.arch,
            weights: model.flat_weights(),
            source_stats,
        }
    }

    pub fn into_parts(self) -> Result<(AdaptableModel, Option<SourceStats>)> {
        if self.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                what: "model checkpoint",
                expected: CHECKPOINT_SCHEMA_VERSION,
                found: self.schema_version,
            });
        }
        let model = AdaptableModel::from_flat_weights(self.arch, &self.weights)?;
        if let Some(stats) = &self.source_stats {
            stats.check_against(&model)?;
        }
        Ok((model, self.source_stats))
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_batch(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..rows * cols)
            .map(|_| rng.random_range(-2.0..2.0))
            .collect();
        Matrix::new(rows, cols, data).unwrap()
    }

    #[test]
    fn layout_freezes_boundary_blocks() {
        let m = AdaptableModel::init(ArchConfig::residual(16, 8), 0).unwrap();
        let blocks: Vec<usize> = m.norm_layout().iter().map(|s| s.block).collect();
        assert_eq!(blocks, vec![1, 1, 2, 2]);
        assert_eq!(m.offset_dim(), 4 * 64);

        let m = AdaptableModel::init(ArchConfig::mlp(2, 8), 0).unwrap();
        assert_eq!(m.offset_dim(), 128);
        assert!(m.norm_layout().iter().all(|s| s.block == 1));
    }

    #[test]
    fn zero_offset_matches_unadapted_model() {
        let m = AdaptableModel::init(ArchConfig::residual(6, 5), 1).unwrap();
        let x = random_batch(10, 6, 2);
        let out = m.forward(&vec![0.0; m.offset_dim()], &x).unwrap();
        let trace = m.trace(None, &x);
        let plain = softmax_rows(&trace.logits, 10, 5);
        assert_eq!(out.probs, plain);
        let again = m.forward(&vec![0.0; m.offset_dim()], &x).unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn probabilities_are_normalized() {
        let m = AdaptableModel::init(ArchConfig::residual(6, 5), 1).unwrap();
        let x = random_batch(20, 6, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let offset: Vec<f64> = (0..m.offset_dim())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let out = m.forward(&offset, &x).unwrap();
        for row in out.probs.iter_rows() {
            assert!(row.iter().all(|&p| p >= 0.0));
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn duplicated_sample_gives_identical_rows_and_zero_stem_variance() {
        let m = AdaptableModel::init(ArchConfig::mlp(3, 4), 5).unwrap();
        let row = vec![0.3, -1.2, 0.8];
        let x = Matrix::from_rows(&vec![row; 7]).unwrap();
        let out = m.forward(&vec![0.0; m.offset_dim()], &x).unwrap();
        for r in 1..7 {
            assert_eq!(out.probs.row(r), out.probs.row(0));
        }
        assert!(out.stats.stem_var.iter().all(|&v| v == 0.0));
        assert!(out.stats.stds.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn offsets_do_not_touch_earlier_blocks() {
        let m = AdaptableModel::init(ArchConfig::residual(6, 5), 1).unwrap();
        let x = random_batch(12, 6, 6);
        let base = m.forward(&vec![0.0; m.offset_dim()], &x).unwrap();
        let mut offset = vec![0.0; m.offset_dim()];
        for slot in m.norm_layout().iter().filter(|s| s.block == 2) {
            for o in &mut offset[slot.range()] {
                *o = 0.7;
            }
        }
        let moved = m.forward(&offset, &x).unwrap();
        for b in 0..2 {
            assert_eq!(base.stats.means[b], moved.stats.means[b]);
            assert_eq!(base.stats.stds[b], moved.stats.stds[b]);
        }
        assert_eq!(base.stats.stem_mean, moved.stats.stem_mean);
        assert_ne!(base.stats.means[2], moved.stats.means[2]);
    }

    #[test]
    fn forward_rejects_bad_inputs() {
        let m = AdaptableModel::init(ArchConfig::mlp(3, 4), 5).unwrap();
        let zero = vec![0.0; m.offset_dim()];
        assert!(m.forward(&zero, &Matrix::zeros(0, 3)).is_err());
        assert!(m.forward(&zero, &Matrix::zeros(2, 4)).is_err());
        assert!(m.forward(&zero[1..], &Matrix::zeros(2, 3)).is_err());
        let nan = Matrix::new(1, 3, vec![0.0, f64::NAN, 1.0]).unwrap();
        assert!(matches!(m.forward(&zero, &nan), Err(Error::NonFinite(_))));
    }

    #[test]
    fn non_finite_activations_are_flagged() {
        let m = AdaptableModel::init(ArchConfig::mlp(3, 4), 5).unwrap();
        let mut offset = vec![0.0; m.offset_dim()];
        offset[0] = f64::INFINITY;
        let out = m.forward(&offset, &random_batch(4, 3, 1)).unwrap();
        assert!(out.non_finite);
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = AdaptableModel::init(ArchConfig::residual(4, 3), 8).unwrap();
        let ckpt = ModelCheckpoint::new(&m, None);
        let json = serde_json::to_string(&ckpt).unwrap();
        let back: ModelCheckpoint = serde_json::from_str(&json).unwrap();
        let (model, stats) = back.into_parts().unwrap();
        assert_eq!(model, m);
        assert!(stats.is_none());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #[test]
            fn rows_sum_to_one_and_offsets_stay_local(
                seed in any::<u64>(),
                residual in any::<bool>(),
                amplitude in 0.0f64..3.0,
            ) {
                let arch = if residual { ArchConfig::residual(5, 4) } else { ArchConfig::mlp(5, 4) };
                let m = AdaptableModel::init(arch, seed).unwrap();
                let x = random_batch(9, 5, seed ^ 1);
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
                let offset: Vec<f64> = (0..m.offset_dim()).map(|_| rng.random_range(-amplitude..=amplitude)).collect();
                let out = m.forward(&offset, &x).unwrap();
                for row in out.probs.iter_rows() {
                    prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-6);
                }

                // Perturb only the last adaptable block.
                let last = m.norm_layout().iter().map(|s| s.block).max().unwrap();
                let mut moved = offset.clone();
                for slot in m.norm_layout().iter().filter(|s| s.block == last) {
                    for o in &mut moved[slot.range()] {
                        *o += 0.5;
                    }
                }
                let other = m.forward(&moved, &x).unwrap();
                for b in 0..last {
                    prop_assert_eq!(&out.stats.means[b], &other.stats.means[b]);
                    prop_assert_eq!(&out.stats.stds[b], &other.stats.stds[b]);
                }
                prop_assert_eq!(&out.stats.stem_mean, &other.stats.stem_mean);
            }
        }
    }
}
