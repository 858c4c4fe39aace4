//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Unknown keys are errors.
//! `seed` seeds the stream, the pre-training, the projector and the sampler.

use std::path::{Path, PathBuf};

use super::runner::{Method, SourceConfig};
use super::stream::{BaseTask, DomainSpec, StreamConfig};
use crate::controller::{ControllerConfig, GammaCalibration};
use crate::model::ArchKind;
use crate::{Error, Result};

/// Stopping threshold of the standard toy preset.
pub const STANDARD_EPSILON: f64 = 0.09;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaSetting {
    /// Calibrate on clean held-out batches before the run.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub method: Method,
    pub stream: StreamConfig,
    pub source: SourceConfig,
    pub controller: ControllerConfig,
    pub gamma: GammaSetting,
    pub calibration: GammaCalibration,
    pub calibration_batches: usize,
    /// Load the model and source statistics instead of pre-training.
    pub checkpoint: Option<PathBuf>,
    /// Start from a previously saved bank.
    pub initial_bank: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

/// Controller settings of the standard toy preset. `gamma` keeps its default
/// until calibrated.
pub fn standard_controller(seed: u64) -> ControllerConfig {
    ControllerConfig {
        epsilon: STANDARD_EPSILON,
        projector_seed: seed,
        sampling_seed: seed,
        ..ControllerConfig::default()
    }
}

impl RunConfig {
    /// Full PACE on the standard stream with an auto-calibrated threshold.
    pub fn standard(seed: u64) -> Self {
        RunConfig {
            method: Method::Pace,
            stream: StreamConfig::standard(seed),
            source: SourceConfig {
                arch: ArchKind::Residual,
                ..SourceConfig::default()
            },
            controller: standard_controller(seed),
            gamma: GammaSetting::Auto,
            calibration: GammaCalibration::default(),
            calibration_batches: 1000,
            checkpoint: None,
            initial_bank: None,
            out: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.stream.seed
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.stream.seed = seed;
        self.controller.projector_seed = seed;
        self.controller.sampling_seed = seed;
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parses a config on top of [`RunConfig::standard`] defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::standard(0);
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            cfg.set(key.trim(), value.trim()).map_err(|e| {
                let msg = match e {
                    Error::Config(m) => m,
                    other => other.to_string(),
                };
                Error::Config(format!("line {}: {msg}", n + 1))
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
        }
        fn flag(key: &str, value: &str) -> Result<bool> {
            match value {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(Error::Config(format!(
                    "invalid boolean {value:?} for {key}"
                ))),
            }
        }
        match key {
            "method" => self.method = value.parse()?,
            "seed" => self.set_seed(num(key, value)?),
            "task" => self.stream.base_task = value.parse::<BaseTask>()?,
            "domains" => {
                self.stream.domains = value
                    .split(',')
                    .filter(|d| !d.trim().is_empty())
                    .map(DomainSpec::parse)
                    .collect::<Result<_>>()?
            }
            "batch_size" => self.stream.batch_size = num(key, value)?,
            "rounds" => self.stream.rounds = num(key, value)?,
            "arch" => {
                self.source.arch = match value {
                    "mlp" => ArchKind::Mlp,
                    "residual" => ArchKind::Residual,
                    _ => return Err(Error::Config(format!("unknown arch {value:?}"))),
                }
            }
            "train_samples" => self.source.train_samples = num(key, value)?,
            "source_samples" => self.source.source_samples = num(key, value)?,
            "epochs" => self.source.train.epochs = num(key, value)?,
            "learning_rate" => self.source.train.learning_rate = num(key, value)?,
            "min_accuracy" => self.source.train.min_accuracy = num(key, value)?,
            "epsilon" => self.controller.epsilon = num(key, value)?,
            "gamma" => {
                self.gamma = if value == "auto" {
                    GammaSetting::Auto
                } else {
                    GammaSetting::Fixed(num(key, value)?)
                }
            }
            "gamma_percentile" => self.calibration.percentile = num(key, value)?,
            "gamma_margin" => self.calibration.margin = num(key, value)?,
            "calibration_batches" => self.calibration_batches = num(key, value)?,
            "beta" => {
                self.controller.beta = num(key, value)?;
                self.calibration.beta = self.controller.beta;
            }
            "population" => self.controller.population_size = num(key, value)?,
            "dim" => self.controller.dim = num(key, value)?,
            "tau0" => self.controller.tau0 = num(key, value)?,
            "lambda" => self.controller.lambda = num(key, value)?,
            "bank_capacity" => self.controller.bank_capacity = num(key, value)?,
            "retrieve_zero" => self.controller.retrieve_zero = flag(key, value)?,
            "checkpoint" => self.checkpoint = Some(PathBuf::from(value)),
            "bank" => self.initial_bank = Some(PathBuf::from(value)),
            "out" => self.out = Some(PathBuf::from(value)),
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.stream.validate()?;
        let mut c = self.controller.clone();
        if let GammaSetting::Fixed(g) = self.gamma {
            c.gamma = g;
        }
        c.validate()?;
        if self.calibration.margin.is_nan()
            || self.calibration.margin <= 0.0
            || !(0.0..=100.0).contains(&self.calibration.percentile)
        {
            return Err(Error::Config("invalid gamma calibration settings".into()));
        }
        if self.gamma == GammaSetting::Auto && self.calibration_batches < 2 {
            return Err(Error::Config(
                "gamma calibration needs at least two batches".into(),
            ));
        }
        if self.source.train_samples == 0 || self.source.source_samples == 0 {
            return Err(Error::Config("sample counts must be positive".into()));
        }
        Ok(())
    }
}
