//! Source pre-training and method runners over a stream.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::stream::{
    generate_stream, seeded, stream_fingerprint, BaseTask, StreamConfig, TaskSampler,
    STREAM_CALIBRATION, STREAM_SOURCE, STREAM_TRAIN,
};
use crate::bank::VectorBank;
use crate::controller::{
    calibrate_gamma, BatchReport, Controller, ControllerConfig, GammaCalibration, Mode, StemStats,
    Telemetry,
};
use crate::model::{
    accuracy, compute_source_stats, pretrain, AdaptableModel, ArchConfig, ArchKind, SourceStats,
    TrainConfig, TrainReport,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SourceConfig {
    pub arch: ArchKind,
    pub train_samples: usize,
    /// Clean samples used for the source activation statistics.
    pub source_samples: usize,
    pub train: TrainConfig,
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig {
            arch: ArchKind::Mlp,
            train_samples: 4000,
            source_samples: 2000,
            train: TrainConfig::default(),
        }
    }
}

/// A pretrained model and its source statistics for one task and seed.
#[derive(Debug, Clone)]
pub struct SourceBundle {
    pub task: BaseTask,
    pub seed: u64,
    pub model: AdaptableModel,
    pub source: SourceStats,
    pub train_report: TrainReport,
}

impl SourceBundle {
    pub fn train(task: BaseTask, seed: u64, config: &SourceConfig) -> Result<Self> {
        let sampler = TaskSampler::new(task, seed);
        let (data, labels) = sampler.sample(config.train_samples, &mut seeded(seed, STREAM_TRAIN));
        let arch = match config.arch {
            ArchKind::Mlp => ArchConfig::mlp(task.input_dim(), task.classes()),
            ArchKind::Residual => ArchConfig::residual(task.input_dim(), task.classes()),
        };
        let train = TrainConfig {
            seed,
            ..config.train
        };
        let (model, train_report) = pretrain(arch, &data, &labels, &train)?;
        let (held_out, _) = sampler.sample(config.source_samples, &mut seeded(seed, STREAM_SOURCE));
        let source = compute_source_stats(&model, [&held_out])?;
        Ok(SourceBundle {
            task,
            seed,
            model,
            source,
            train_report,
        })
    }

    /// Builds a bundle from a saved model and its statistics.
    pub fn from_parts(
        task: BaseTask,
        seed: u64,
        model: AdaptableModel,
        source: SourceStats,
    ) -> Result<Self> {
        source.check_against(&model)?;
        if model.arch().input_dim != task.input_dim() || model.class_count() != task.classes() {
            return Err(Error::Config(format!(
                "model shape does not fit task {}",
                task.as_str()
            )));
        }
        Ok(SourceBundle {
            task,
            seed,
            model,
            source,
            train_report: TrainReport {
                accuracy: f64::NAN,
                final_loss: f64::NAN,
            },
        })
    }
}

/// Stem statistics of `batches` clean held-out batches of `batch_size`.
pub fn clean_stem_stats(
    bundle: &SourceBundle,
    batch_size: usize,
    batches: usize,
) -> Result<Vec<StemStats>> {
    let sampler = TaskSampler::new(bundle.task, bundle.seed);
    let mut rng = seeded(bundle.seed, STREAM_CALIBRATION);
    let zero = vec![0.0; bundle.model.offset_dim()];
    (0..batches)
        .map(|_| {
            let (x, _) = sampler.sample(batch_size, &mut rng);
            let stats = bundle.model.forward(&zero, &x)?.stats;
            StemStats::new(stats.stem_mean, stats.stem_var)
        })
        .collect()
}

/// Shift threshold from the rolling scores of clean held-out batches.
pub fn calibrate_bundle_gamma(
    bundle: &SourceBundle,
    batch_size: usize,
    batches: usize,
    calibration: &GammaCalibration,
) -> Result<f64> {
    calibrate_gamma(&clean_stem_stats(bundle, batch_size, batches)?, calibration)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// The source model, never adapted.
    #[serde(rename = "noadapt")]
    NoAdapt,
    /// Stopping, shift detection and the vector bank.
    Pace,
    /// Never stops (`epsilon = 0`).
    PaceAlways,
    /// Subspace adaptation only.
    PaceV1,
    /// Subspace adaptation with shift detection and the bank, never stopping.
    PaceV2,
    /// Subspace adaptation with stopping and detection but no bank.
    PaceV3,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::NoAdapt,
        Method::Pace,
        Method::PaceAlways,
        Method::PaceV1,
        Method::PaceV2,
        Method::PaceV3,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::NoAdapt => "noadapt",
            Method::Pace => "pace",
            Method::PaceAlways => "pace-always",
            Method::PaceV1 => "pace-v1",
            Method::PaceV2 => "pace-v2",
            Method::PaceV3 => "pace-v3",
        }
    }

    /// Controller settings for this method on top of `base`; `None` for
    /// [`Method::NoAdapt`].
    pub fn controller_config(&self, base: &ControllerConfig) -> Option<ControllerConfig> {
        let mut c = base.clone();
        match self {
            Method::NoAdapt => return None,
            Method::Pace => {}
            Method::PaceAlways => c.epsilon = 0.0,
            Method::PaceV1 => {
                c.epsilon = 0.0;
                c.use_bank = false;
                c.detect_while_adapting = false;
            }
            Method::PaceV2 => {
                c.epsilon = 0.0;
                c.use_bank = true;
                c.detect_while_adapting = true;
            }
            Method::PaceV3 => c.use_bank = false,
        }
        Some(c)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

/// A controller report joined with the hidden evaluation tags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub round: usize,
    pub domain: usize,
    #[serde(flatten)]
    pub report: BatchReport,
}

impl BatchRecord {
    pub fn accuracy(&self) -> f64 {
        self.report.accuracy.unwrap_or(f64::NAN)
    }

    pub fn adapted(&self) -> bool {
        self.report.mode == Mode::Adapting
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub method: Method,
    pub stream: StreamConfig,
    pub stream_fingerprint: String,
    pub records: Vec<BatchRecord>,
    pub telemetry: Telemetry,
    pub population_size: usize,
    pub wall_seconds: f64,
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

impl RunReport {
    pub fn mean_accuracy(&self) -> f64 {
        mean(self.records.iter().map(BatchRecord::accuracy))
    }

    /// Mean accuracy per domain position, over all rounds.
    pub fn domain_accuracy(&self) -> Vec<f64> {
        (0..self.stream.domains.len())
            .map(|d| {
                mean(
                    self.records
                        .iter()
                        .filter(|r| r.domain == d)
                        .map(BatchRecord::accuracy),
                )
            })
            .collect()
    }

    pub fn round_accuracy(&self) -> Vec<f64> {
        (0..self.stream.rounds)
            .map(|k| {
                mean(
                    self.records
                        .iter()
                        .filter(|r| r.round == k)
                        .map(BatchRecord::accuracy),
                )
            })
            .collect()
    }

    pub fn adapted_per_round(&self) -> Vec<usize> {
        (0..self.stream.rounds)
            .map(|k| {
                self.records
                    .iter()
                    .filter(|r| r.round == k && r.adapted())
                    .count()
            })
            .collect()
    }

    pub fn adapted_fraction(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().filter(|r| r.adapted()).count() as f64 / self.records.len() as f64
    }

    pub fn forward_passes(&self) -> u64 {
        self.telemetry.forward_passes
    }

    /// `forward = K * adapted + frozen + retrieval + fallback`, and the
    /// per-batch counts add up to the total.
    pub fn accounting_holds(&self) -> bool {
        let t = &self.telemetry;
        let k = self.population_size as u64;
        let per_batch: u64 = self.records.iter().map(|r| r.report.forward_passes).sum();
        t.forward_passes
            == k * t.adapted_batches + t.frozen_batches + t.retrieval_passes + t.fallback_passes
            && per_batch == t.forward_passes
            && t.batches == self.records.len() as u64
    }
}

/// Runs `method` over the stream. The controller is returned for adaptive
/// methods so callers can persist its bank.
pub fn run_method(
    bundle: &SourceBundle,
    stream: &StreamConfig,
    method: Method,
    base: &ControllerConfig,
) -> Result<(RunReport, Option<Controller>)> {
    run_method_with_bank(bundle, stream, method, base, None)
}

/// As [`run_method`], starting adaptive methods from `bank` when given.
/// Methods without a bank ignore it.
pub fn run_method_with_bank(
    bundle: &SourceBundle,
    stream: &StreamConfig,
    method: Method,
    base: &ControllerConfig,
    bank: Option<VectorBank>,
) -> Result<(RunReport, Option<Controller>)> {
    if stream.base_task != bundle.task {
        return Err(Error::Config(format!(
            "stream task {} does not match the source model's task {}",
            stream.base_task.as_str(),
            bundle.task.as_str()
        )));
    }
    if stream.seed != bundle.seed {
        return Err(Error::Config(format!(
            "stream seed {} differs from the source model's seed {}; the class layout is drawn from the seed",
            stream.seed, bundle.seed
        )));
    }
    let fingerprint = stream_fingerprint(stream)?;
    let batches = generate_stream(stream)?;
    let start = Instant::now();
    let mut records = Vec::with_capacity(batches.len());

    let (telemetry, population_size, controller) = match method.controller_config(base) {
        None => {
            let zero = vec![0.0; bundle.model.offset_dim()];
            let mut telemetry = Telemetry::default();
            for batch in batches {
                let out = bundle.model.forward(&zero, &batch.inputs)?;
                telemetry.batches += 1;
                telemetry.frozen_batches += 1;
                telemetry.forward_passes += 1;
                records.push(BatchRecord {
                    round: batch.round,
                    domain: batch.domain,
                    report: BatchReport {
                        batch_index: batch.index as u64,
                        mode: Mode::Frozen,
                        fitness_best: f64::NAN,
                        rel_mean_change: f64::NAN,
                        shift_score: f64::NAN,
                        shift_detected: false,
                        stopped: false,
                        forward_passes: 1,
                        accuracy: Some(accuracy(&out.probs, &batch.labels)),
                    },
                });
            }
            (telemetry, 1, None)
        }
        Some(config) => {
            let k = config.population_size;
            let use_bank = config.use_bank;
            let mut controller =
                Controller::new(config, bundle.model.clone(), bundle.source.clone())?;
            if let Some(bank) = bank.filter(|_| use_bank) {
                controller = controller.with_bank(bank)?;
            }
            for batch in batches {
                let (probs, mut report) = controller.process_batch(&batch.inputs)?;
                report.accuracy = Some(accuracy(&probs, &batch.labels));
                records.push(BatchRecord {
                    round: batch.round,
                    domain: batch.domain,
                    report,
                });
            }
            (*controller.telemetry(), k, Some(controller))
        }
    };

    Ok((
        RunReport {
            method,
            stream: stream.clone(),
            stream_fingerprint: fingerprint,
            records,
            telemetry,
            population_size,
            wall_seconds: start.elapsed().as_secs_f64(),
        },
        controller,
    ))
}
