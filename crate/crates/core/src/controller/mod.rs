//! Per-batch adaptation state machine.
//!
//! In `Adapting` mode each batch costs `K` forward passes: the CMA-ES
//! population is scored, the lowest-fitness candidate's predictions are
//! served, the distribution is updated and the stopping rule is checked. In
//! `Frozen` mode each batch costs one forward pass with the frozen offset and
//! the stem statistics are compared with the (frozen) EMA. A detected shift
//! archives the current mean, retrieves a warm start from the bank and
//! resumes adaptation.

mod shift;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bank::VectorBank;
use crate::cmaes::{best_candidate, CmaesState, RankedCandidate};
use crate::fitness::{CandidateEvaluator, FitnessConfig};
use crate::model::{AdaptableModel, Matrix, SourceStats};
use crate::projection::FastfoodProjector;
use crate::{Error, Result};

pub use shift::{
    calibrate_gamma, gaussian_kl, percentile, rolling_scores, shift_score, should_stop, update_ema,
    GammaCalibration, ShiftMonitor, StemStats, VARIANCE_FLOOR,
};

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    /// Stopping threshold on the relative mean change; 0 never stops.
    pub epsilon: f64,
    /// Shift threshold on the symmetric-KL score; infinity disables detection.
    pub gamma: f64,
    /// EMA factor in `(0, 1]`.
    pub beta: f64,
    pub population_size: usize,
    /// Search dimension `d`.
    pub dim: usize,
    pub tau0: f64,
    pub lambda: f64,
    pub bank_capacity: usize,
    /// Archive and retrieve through the vector bank on shifts.
    pub use_bank: bool,
    /// Act on detected shifts even while adapting (never-stopping variants).
    pub detect_while_adapting: bool,
    /// Offer the zero vector as a retrieval candidate.
    pub retrieve_zero: bool,
    pub projector_seed: u64,
    pub sampling_seed: u64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            epsilon: 0.045,
            gamma: 0.03,
            beta: 0.8,
            population_size: 12,
            dim: 32,
            tau0: 0.1,
            lambda: FitnessConfig::DEFAULT_LAMBDA,
            bank_capacity: crate::bank::DEFAULT_CAPACITY,
            use_bank: true,
            detect_while_adapting: false,
            retrieve_zero: true,
            projector_seed: 0,
            sampling_seed: 0,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epsilon.is_nan() || self.epsilon < 0.0 {
            return Err(Error::Config(format!(
                "epsilon must be >= 0, got {}",
                self.epsilon
            )));
        }
        if self.gamma.is_nan() || self.gamma <= 0.0 {
            return Err(Error::Config(format!(
                "gamma must be > 0, got {}",
                self.gamma
            )));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::Config(format!(
                "beta must be in (0, 1], got {}",
                self.beta
            )));
        }
        if self.population_size < 2 {
            return Err(Error::Config("population size must be at least 2".into()));
        }
        if self.dim == 0 {
            return Err(Error::Config("search dimension must be positive".into()));
        }
        if !(self.tau0 > 0.0 && self.tau0.is_finite()) {
            return Err(Error::Config(format!(
                "tau0 must be positive, got {}",
                self.tau0
            )));
        }
        FitnessConfig::new(self.lambda)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Adapting,
    Frozen,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Adapting => "adapting",
            Mode::Frozen => "frozen",
        }
    }
}

/// Running counters; `forward_passes` always equals
/// `K * adapted + frozen + retrieval_passes + fallback_passes`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Telemetry {
    pub batches: u64,
    pub adapted_batches: u64,
    pub frozen_batches: u64,
    pub forward_passes: u64,
    pub shifts_detected: u64,
    pub stops: u64,
    pub retrieval_passes: u64,
    pub fallback_passes: u64,
}

/// One row of the per-batch log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub batch_index: u64,
    /// Mode the batch was processed in.
    pub mode: Mode,
    pub fitness_best: f64,
    /// NaN for frozen batches.
    pub rel_mean_change: f64,
    /// NaN until the EMA exists.
    pub shift_score: f64,
    pub shift_detected: bool,
    /// Adaptation stopped after this batch.
    pub stopped: bool,
    pub forward_passes: u64,
    pub accuracy: Option<f64>,
}

/// The adaptation controller. Owns the frozen model, the projector and all
/// mutable adaptation state.
#[derive(Debug, Clone)]
pub struct Controller {
    config: ControllerConfig,
    model: AdaptableModel,
    source: SourceStats,
    projector: FastfoodProjector,
    mode: Mode,
    cmaes: CmaesState,
    frozen_offset: Option<Vec<f64>>,
    monitor: ShiftMonitor,
    bank: VectorBank,
    telemetry: Telemetry,
    rng: ChaCha8Rng,
    retrieval_log: Vec<RetrievalEvent>,
}

fn evaluator<'a>(
    model: &'a AdaptableModel,
    projector: &'a FastfoodProjector,
    source: &'a SourceStats,
    lambda: f64,
) -> Result<CandidateEvaluator<'a>> {
    CandidateEvaluator::new(model, projector, source, FitnessConfig::new(lambda)?)
}

/// Record of one shift-triggered reinitialization.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalEvent {
    pub batch_index: u64,
    pub archived: Option<Vec<f64>>,
    pub bank_len_at_retrieval: usize,
    pub forward_passes: usize,
    pub init_mean: Vec<f64>,
    pub from_bank: Option<usize>,
}

impl Controller {
    pub fn new(
        config: ControllerConfig,
        model: AdaptableModel,
        source: SourceStats,
    ) -> Result<Self> {
        config.validate()?;
        source.check_against(&model)?;
        let projector =
            FastfoodProjector::new(config.dim, model.offset_dim(), config.projector_seed)?;
        let cmaes = CmaesState::new(vec![0.0; config.dim], config.tau0, config.population_size)?;
        let bank = VectorBank::new(config.dim, config.bank_capacity)?;
        let rng = ChaCha8Rng::seed_from_u64(config.sampling_seed);
        let monitor = ShiftMonitor::new(config.gamma, config.beta)?;
        Ok(Controller {
            config,
            model,
            source,
            projector,
            mode: Mode::Adapting,
            cmaes,
            frozen_offset: None,
            monitor,
            bank,
            telemetry: Telemetry::default(),
            rng,
            retrieval_log: Vec::new(),
        })
    }

    /// Starts from an existing bank, e.g. loaded from disk.
    pub fn with_bank(mut self, bank: VectorBank) -> Result<Self> {
        if bank.dim() != self.config.dim {
            return Err(Error::DimensionMismatch {
                what: "bank dimension",
                expected: self.config.dim,
                got: bank.dim(),
            });
        }
        self.bank = bank;
        Ok(self)
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    pub fn model(&self) -> &AdaptableModel {
        &self.model
    }

    pub fn projector(&self) -> &FastfoodProjector {
        &self.projector
    }

    pub fn source(&self) -> &SourceStats {
        &self.source
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn cmaes(&self) -> &CmaesState {
        &self.cmaes
    }

    pub fn frozen_offset(&self) -> Option<&[f64]> {
        self.frozen_offset.as_deref()
    }

    pub fn ema(&self) -> Option<&StemStats> {
        self.monitor.ema()
    }

    pub fn bank(&self) -> &VectorBank {
        &self.bank
    }

    pub fn telemetry(&self) -> &Telemetry {
        &self.telemetry
    }

    pub fn retrieval_log(&self) -> &[RetrievalEvent] {
        &self.retrieval_log
    }

    /// Processes one unlabeled batch and returns the served class probabilities.
    pub fn process_batch(&mut self, batch: &Matrix) -> Result<(Matrix, BatchReport)> {
        self.model.check_batch(batch)?;
        let index = self.telemetry.batches;
        let passes_before = self.telemetry.forward_passes;
        let (probs, mut report) = match self.mode {
            Mode::Adapting => self.adapt_step(batch, index)?,
            Mode::Frozen => self.frozen_step(batch, index)?,
        };
        self.telemetry.batches += 1;
        report.forward_passes = self.telemetry.forward_passes - passes_before;
        Ok((probs, report))
    }

    fn adapt_step(&mut self, batch: &Matrix, index: u64) -> Result<(Matrix, BatchReport)> {
        let k = self.config.population_size as u64;
        let population = self.cmaes.sample_population(&mut self.rng);
        let evaluator = evaluator(
            &self.model,
            &self.projector,
            &self.source,
            self.config.lambda,
        )?;
        let evaluations = population
            .iter()
            .map(|v| evaluator.evaluate(v, batch))
            .collect::<Result<Vec<_>>>()?;
        self.telemetry.forward_passes += k;
        self.telemetry.adapted_batches += 1;

        let ranked: Vec<RankedCandidate> = population
            .into_iter()
            .zip(&evaluations)
            .map(|(v, e)| RankedCandidate::new(v, e.fitness))
            .collect();
        let best = best_candidate(&ranked)?;

        if !ranked[best].fitness.is_finite() {
            // Every candidate blew up: serve the source model, keep the state.
            let fallback = evaluator.evaluate_offset(&vec![0.0; self.model.offset_dim()], batch)?;
            self.telemetry.fallback_passes += 1;
            self.telemetry.forward_passes += 1;
            let stem = StemStats::new(fallback.stats.stem_mean, fallback.stats.stem_var)?;
            let u = self.monitor.score(&stem)?;
            return Ok((
                fallback.probs,
                BatchReport {
                    batch_index: index,
                    mode: Mode::Adapting,
                    fitness_best: fallback.fitness,
                    rel_mean_change: f64::NAN,
                    shift_score: u,
                    shift_detected: false,
                    stopped: false,
                    forward_passes: 0,
                    accuracy: None,
                },
            ));
        }

        let best_eval = &evaluations[best];
        // The stem is never adapted, so every candidate shares these stats.
        let stem = StemStats::new(
            best_eval.stats.stem_mean.clone(),
            best_eval.stats.stem_var.clone(),
        )?;
        let u = self.monitor.score(&stem)?;
        let probs = best_eval.probs.clone();
        let fitness_best = ranked[best].fitness;

        if self.config.detect_while_adapting && self.monitor.exceeds(u) {
            self.reinitialize(batch, index, stem)?;
            return Ok((
                probs,
                BatchReport {
                    batch_index: index,
                    mode: Mode::Adapting,
                    fitness_best,
                    rel_mean_change: f64::NAN,
                    shift_score: u,
                    shift_detected: true,
                    stopped: false,
                    forward_passes: 0,
                    accuracy: None,
                },
            ));
        }

        let previous = self.cmaes.mean().to_vec();
        let rel_change = self.cmaes.update(&ranked)?;
        self.monitor.track(&stem)?;

        let stopped = should_stop(&previous, self.cmaes.mean(), self.config.epsilon)?;
        if stopped {
            self.frozen_offset = Some(self.projector.project(self.cmaes.mean())?);
            self.mode = Mode::Frozen;
            self.telemetry.stops += 1;
        }
        Ok((
            probs,
            BatchReport {
                batch_index: index,
                mode: Mode::Adapting,
                fitness_best,
                rel_mean_change: rel_change,
                shift_score: u,
                shift_detected: false,
                stopped,
                forward_passes: 0,
                accuracy: None,
            },
        ))
    }

    fn frozen_step(&mut self, batch: &Matrix, index: u64) -> Result<(Matrix, BatchReport)> {
        let offset = self
            .frozen_offset
            .as_ref()
            .expect("frozen mode always has an offset");
        let eval = evaluator(
            &self.model,
            &self.projector,
            &self.source,
            self.config.lambda,
        )?
        .evaluate_offset(offset, batch)?;
        self.telemetry.forward_passes += 1;
        self.telemetry.frozen_batches += 1;

        let stem = StemStats::new(eval.stats.stem_mean.clone(), eval.stats.stem_var.clone())?;
        let u = self.monitor.score(&stem)?;
        let detected = self.monitor.exceeds(u);
        if detected {
            self.reinitialize(batch, index, stem)?;
        }
        Ok((
            eval.probs,
            BatchReport {
                batch_index: index,
                mode: Mode::Frozen,
                fitness_best: eval.fitness,
                rel_mean_change: f64::NAN,
                shift_score: u,
                shift_detected: detected,
                stopped: false,
                forward_passes: 0,
                accuracy: None,
            },
        ))
    }

    /// Archive the current mean, pick a warm start and restart adaptation.
    fn reinitialize(&mut self, batch: &Matrix, index: u64, stem: StemStats) -> Result<()> {
        self.telemetry.shifts_detected += 1;
        let current = self.cmaes.mean().to_vec();
        let mut archived = None;
        if self.config.use_bank {
            self.bank.archive(current.clone())?;
            archived = Some(current);
        }
        let retrieval = {
            let evaluator = evaluator(
                &self.model,
                &self.projector,
                &self.source,
                self.config.lambda,
            )?;
            self.bank
                .retrieve_init(batch, &evaluator, self.config.retrieve_zero)?
        };
        self.telemetry.retrieval_passes += retrieval.forward_passes as u64;
        self.telemetry.forward_passes += retrieval.forward_passes as u64;
        self.retrieval_log.push(RetrievalEvent {
            batch_index: index,
            archived,
            bank_len_at_retrieval: self.bank.len(),
            forward_passes: retrieval.forward_passes,
            init_mean: retrieval.vector.clone(),
            from_bank: retrieval.index,
        });

        self.cmaes = CmaesState::new(
            retrieval.vector,
            self.config.tau0,
            self.config.population_size,
        )?;
        self.frozen_offset = None;
        self.monitor.reset(stem);
        self.mode = Mode::Adapting;
        Ok(())
    }
}
