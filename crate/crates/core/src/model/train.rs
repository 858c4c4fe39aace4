//! Pre-deployment training of the toy source models.
//!
//! Plain minibatch backpropagation with Adam on cross-entropy. This is only
//! used to produce the source model; test-time adaptation never computes
//! gradients.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{softmax_rows, AdaptableModel, ArchConfig, Matrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Training fails with the reached accuracy if it stays below this (percent).
    pub min_accuracy: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 64,
            learning_rate: 3e-3,
            seed: 0,
            min_accuracy: 90.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainReport {
    /// Accuracy on the training data after the last epoch, in percent.
    pub accuracy: f64,
    pub final_loss: f64,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    fn new(len: usize, lr: f64) -> Self {
        Adam {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t);
        let c2 = 1.0 - B2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grads[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grads[i] * grads[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + 1e-8);
        }
    }
}

/// Cross-entropy loss and its gradient with respect to the flat weights.
fn loss_and_grad(model: &AdaptableModel, x: &Matrix, labels: &[usize]) -> (f64, Vec<f64>) {
    let arch = *model.arch();
    let rows = x.rows();
    let width = arch.width;
    let classes = arch.classes;
    let trace = model.trace(None, x);
    let probs = softmax_rows(&trace.logits, rows, classes);

    let mut loss = 0.0;
    let mut dlogits = probs.as_slice().to_vec();
    for (r, &y) in labels.iter().enumerate() {
        loss -= probs.row(r)[y].max(1e-300).ln();
        dlogits[r * classes + y] -= 1.0;
    }
    loss /= rows as f64;
    for g in &mut dlogits {
        *g /= rows as f64;
    }

    // Gradient buffers laid out like `flat_weights`.
    let mut block_grads: Vec<[Vec<f64>; 4]> = (0..arch.blocks)
        .map(|b| {
            let fan_in = if b == 0 { arch.input_dim } else { width };
            [
                vec![0.0; width * fan_in],
                vec![0.0; width],
                vec![0.0; width],
                vec![0.0; width],
            ]
        })
        .collect();
    let mut head_w = vec![0.0; classes * width];
    let mut head_b = vec![0.0; classes];

    let last = &trace.blocks[arch.blocks - 1].output;
    let mut dh = vec![0.0; rows * width];
    for r in 0..rows {
        for c in 0..classes {
            let g = dlogits[r * classes + c];
            head_b[c] += g;
            for j in 0..width {
                head_w[c * width + j] += g * last[r * width + j];
                dh[r * width + j] += g * model.head_weight[c * width + j];
            }
        }
    }

    for b in (0..arch.blocks).rev() {
        let t = &trace.blocks[b];
        let w = &model.blocks[b];
        let fan_in = if b == 0 { arch.input_dim } else { width };
        let residual = arch.is_residual(b);
        let [gw, gb, gscale, gshift] = &mut block_grads[b];

        let mut dz = vec![0.0; rows * width];
        for r in 0..rows {
            let mut dxhat = vec![0.0; width];
            for j in 0..width {
                let k = r * width + j;
                let da = if t.pre_activation[k] > 0.0 {
                    dh[k]
                } else {
                    0.0
                };
                gscale[j] += da * t.normalized[k];
                gshift[j] += da;
                dxhat[j] = da * w.scale[j];
            }
            let xhat = &t.normalized[r * width..(r + 1) * width];
            let mean_d = dxhat.iter().sum::<f64>() / width as f64;
            let mean_dx = dxhat.iter().zip(xhat).map(|(a, b)| a * b).sum::<f64>() / width as f64;
            for j in 0..width {
                dz[r * width + j] = t.inv_std[r] * (dxhat[j] - mean_d - xhat[j] * mean_dx);
            }
        }

        let mut dinput = vec![0.0; rows * fan_in];
        for r in 0..rows {
            let input = &t.input[r * fan_in..(r + 1) * fan_in];
            for o in 0..width {
                let g = dz[r * width + o];
                gb[o] += g;
                for i in 0..fan_in {
                    gw[o * fan_in + i] += g * input[i];
                    dinput[r * fan_in + i] += g * w.weight[o * fan_in + i];
                }
            }
        }
        if residual {
            for (d, h) in dinput.iter_mut().zip(&dh) {
                *d += h;
            }
        }
        dh = dinput;
    }

    let mut grads = Vec::with_capacity(arch.weight_count());
    for [gw, gb, gs, gt] in block_grads {
        grads.extend(gw);
        grads.extend(gb);
        grads.extend(gs);
        grads.extend(gt);
    }
    grads.extend(head_w);
    grads.extend(head_b);
    (loss, grads)
}

/// Percentage of rows whose argmax matches `labels`.
pub fn accuracy(probs: &Matrix, labels: &[usize]) -> f64 {
    let hits = probs
        .argmax_rows()
        .iter()
        .zip(labels)
        .filter(|(a, b)| a == b)
        .count();
    100.0 * hits as f64 / labels.len().max(1) as f64
}

/// Trains a fresh model of architecture `arch` on labeled source data.
pub fn pretrain(
    arch: ArchConfig,
    data: &Matrix,
    labels: &[usize],
    config: &TrainConfig,
) -> Result<(AdaptableModel, TrainReport)> {
    if data.rows() == 0 || data.rows() != labels.len() {
        return Err(Error::invalid(format!(
            "training data has {} rows and {} labels",
            data.rows(),
            labels.len()
        )));
    }
    if labels.iter().any(|&y| y >= arch.classes) {
        return Err(Error::invalid("label out of range"));
    }
    let mut model = AdaptableModel::init(arch, config.seed)?;
    model.check_batch(data)?;

    let mut params = model.flat_weights();
    let mut adam = Adam::new(params.len(), config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
    let mut order: Vec<usize> = (0..data.rows()).collect();
    let mut final_loss = f64::NAN;
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(config.batch_size.max(1)) {
            let x = data.select_rows(chunk);
            let y: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let (loss, grads) = loss_and_grad(&model, &x, &y);
            adam.step(&mut params, &grads);
            model = AdaptableModel::from_flat_weights(arch, &params)?;
            epoch_loss += loss;
            batches += 1;
        }
        final_loss = epoch_loss / batches as f64;
    }

    let probs = model.forward(&vec![0.0; model.offset_dim()], data)?.probs;
    let report = TrainReport {
        accuracy: accuracy(&probs, labels),
        final_loss,
    };
    if report.accuracy < config.min_accuracy {
        return Err(Error::NotConverged {
            accuracy: report.accuracy,
            required: config.min_accuracy,
        });
    }
    Ok((model, report))
}
