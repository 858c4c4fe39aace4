//! One configured run from source model to files on disk.

use std::path::Path;

use super::config::{GammaSetting, RunConfig};
use super::report::{write_batches_csv, RunSummary};
use super::runner::{calibrate_bundle_gamma, run_method_with_bank, RunReport, SourceBundle};
use crate::bank::VectorBank;
use crate::controller::{Controller, ControllerConfig};
use crate::model::ModelCheckpoint;
use crate::{Error, Result};

pub const BATCHES_FILE: &str = "batches.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const BANK_FILE: &str = "bank.json";
pub const CHECKPOINT_FILE: &str = "model.ckpt";

#[derive(Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub summary: RunSummary,
    pub bundle: SourceBundle,
    /// Effective controller settings, with the resolved threshold.
    pub controller_config: ControllerConfig,
    pub controller: Option<Controller>,
}

/// Pre-trains, or loads the configured checkpoint.
pub fn prepare_bundle(config: &RunConfig) -> Result<SourceBundle> {
    let seed = config.seed();
    match &config.checkpoint {
        None => SourceBundle::train(config.stream.base_task, seed, &config.source),
        Some(path) => {
            let (model, stats) = ModelCheckpoint::load(path)?.into_parts()?;
            let stats = stats.ok_or_else(|| {
                Error::Config(format!("{} has no source statistics", path.display()))
            })?;
            SourceBundle::from_parts(config.stream.base_task, seed, model, stats)
        }
    }
}

pub fn resolve_gamma(config: &RunConfig, bundle: &SourceBundle) -> Result<f64> {
    match config.gamma {
        GammaSetting::Fixed(g) => Ok(g),
        GammaSetting::Auto => calibrate_bundle_gamma(
            bundle,
            config.stream.batch_size,
            config.calibration_batches,
            &config.calibration,
        ),
    }
}

pub fn load_bank(path: &Path) -> Result<VectorBank> {
    VectorBank::from_json(&std::fs::read_to_string(path)?)
}

/// Runs the configured method and, when `config.out` is set, writes
/// `batches.csv`, `summary.json`, `model.ckpt` and `bank.json` (adaptive
/// methods with a bank only).
pub fn execute(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let bundle = prepare_bundle(config)?;
    let mut controller_config = config.controller.clone();
    controller_config.gamma = resolve_gamma(config, &bundle)?;
    let bank = config.initial_bank.as_deref().map(load_bank).transpose()?;
    let (report, controller) = run_method_with_bank(
        &bundle,
        &config.stream,
        config.method,
        &controller_config,
        bank,
    )?;
    let bank_size = controller.as_ref().map_or(0, |c| c.bank().len());
    let summary = RunSummary::new(
        &report,
        &controller_config,
        bundle.model.offset_dim(),
        bank_size,
    );
    let outcome = RunOutcome {
        report,
        summary,
        bundle,
        controller_config,
        controller,
    };
    if let Some(dir) = &config.out {
        write_outputs(dir, &outcome)?;
    }
    Ok(outcome)
}

pub fn write_outputs(dir: &Path, outcome: &RunOutcome) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_batches_csv(&dir.join(BATCHES_FILE), &outcome.report.records)?;
    outcome.summary.save(&dir.join(SUMMARY_FILE))?;
    ModelCheckpoint::new(&outcome.bundle.model, Some(outcome.bundle.source.clone()))
        .save(&dir.join(CHECKPOINT_FILE))?;
    if let Some(c) = outcome.controller.as_ref().filter(|c| c.config().use_bank) {
        std::fs::write(dir.join(BANK_FILE), c.bank().to_json()?)?;
    }
    Ok(())
}
