//! Run summaries, the per-batch CSV and run comparison.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::runner::{BatchRecord, Method, RunReport};
use crate::controller::{BatchReport, ControllerConfig, Mode, Telemetry};
use crate::{Error, Result};

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;
pub const BATCHES_CSV_VERSION: u32 = 1;

/// Column order of `batches.csv`.
pub const BATCHES_CSV_HEADER: [&str; 11] = [
    "batch_index",
    "round",
    "domain",
    "mode",
    "fitness_best",
    "rel_mean_change",
    "shift_score",
    "shift_detected",
    "stopped",
    "forward_passes",
    "accuracy",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CsvRow {
    batch_index: u64,
    round: usize,
    domain: usize,
    mode: Mode,
    fitness_best: f64,
    rel_mean_change: f64,
    shift_score: f64,
    shift_detected: bool,
    stopped: bool,
    forward_passes: u64,
    accuracy: f64,
}

pub fn write_batches_csv(path: &Path, records: &[BatchRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(CsvRow {
            batch_index: r.report.batch_index,
            round: r.round,
            domain: r.domain,
            mode: r.report.mode,
            fitness_best: r.report.fitness_best,
            rel_mean_change: r.report.rel_mean_change,
            shift_score: r.report.shift_score,
            shift_detected: r.report.shift_detected,
            stopped: r.report.stopped,
            forward_passes: r.report.forward_passes,
            accuracy: r.accuracy(),
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_batches_csv(path: &Path) -> Result<Vec<BatchRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != BATCHES_CSV_HEADER {
        return Err(Error::invalid(format!(
            "unexpected batches.csv header {header:?}"
        )));
    }
    r.deserialize::<CsvRow>()
        .map(|row| {
            let row = row?;
            Ok(BatchRecord {
                round: row.round,
                domain: row.domain,
                report: BatchReport {
                    batch_index: row.batch_index,
                    mode: row.mode,
                    fitness_best: row.fitness_best,
                    rel_mean_change: row.rel_mean_change,
                    shift_score: row.shift_score,
                    shift_detected: row.shift_detected,
                    stopped: row.stopped,
                    forward_passes: row.forward_passes,
                    accuracy: Some(row.accuracy).filter(|a| !a.is_nan()),
                },
            })
        })
        .collect()
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSummary {
    pub schema_version: u32,
    pub batches_csv_version: u32,
    pub method: Method,
    pub seed: u64,
    pub stream_fingerprint: String,
    pub base_task: String,
    /// `kind:severity:batches[:drift]` per domain.
    pub domains: Vec<String>,
    pub rounds: usize,
    pub batch_size: usize,
    pub epsilon: f64,
    pub gamma: f64,
    pub beta: f64,
    pub population_size: usize,
    pub dim: usize,
    pub offset_dim: usize,
    pub tau0: f64,
    pub lambda: f64,
    pub bank_capacity: usize,
    pub mean_accuracy: f64,
    pub domain_accuracy: Vec<f64>,
    pub round_accuracy: Vec<f64>,
    pub adapted_fraction: f64,
    pub adapted_per_round: Vec<usize>,
    pub forward_passes: u64,
    pub telemetry: Telemetry,
    pub bank_size: usize,
    pub wall_seconds: f64,
}

impl RunSummary {
    pub fn new(
        report: &RunReport,
        controller: &ControllerConfig,
        offset_dim: usize,
        bank_size: usize,
    ) -> Self {
        let s = &report.stream;
        RunSummary {
            schema_version: SUMMARY_SCHEMA_VERSION,
            batches_csv_version: BATCHES_CSV_VERSION,
            method: report.method,
            seed: s.seed,
            stream_fingerprint: report.stream_fingerprint.clone(),
            base_task: s.base_task.as_str().to_owned(),
            domains: s.domains.iter().map(ToString::to_string).collect(),
            rounds: s.rounds,
            batch_size: s.batch_size,
            epsilon: controller.epsilon,
            gamma: controller.gamma,
            beta: controller.beta,
            population_size: controller.population_size,
            dim: controller.dim,
            offset_dim,
            tau0: controller.tau0,
            lambda: controller.lambda,
            bank_capacity: controller.bank_capacity,
            mean_accuracy: report.mean_accuracy(),
            domain_accuracy: report.domain_accuracy(),
            round_accuracy: report.round_accuracy(),
            adapted_fraction: report.adapted_fraction(),
            adapted_per_round: report.adapted_per_round(),
            forward_passes: report.forward_passes(),
            telemetry: report.telemetry,
            bank_size,
            wall_seconds: report.wall_seconds,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: RunSummary = serde_json::from_str(text)?;
        if s.schema_version != SUMMARY_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                what: "run summary",
                expected: SUMMARY_SCHEMA_VERSION,
                found: s.schema_version,
            });
        }
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Loads `path`, or `path/summary.json` when `path` is a run directory.
    pub fn load(path: &Path) -> Result<Self> {
        let file = if path.is_dir() {
            path.join("summary.json")
        } else {
            path.to_path_buf()
        };
        Self::from_json(&std::fs::read_to_string(&file)?)
    }
}

/// `b - a` for every comparable quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub method_a: Method,
    pub method_b: Method,
    pub mean_accuracy_delta: f64,
    pub domain_accuracy_delta: Vec<f64>,
    pub round_accuracy_delta: Vec<f64>,
    pub adapted_fraction_delta: f64,
    pub adapted_per_round_delta: Vec<i64>,
    pub forward_passes_delta: i64,
}

pub fn compare(a: &RunSummary, b: &RunSummary) -> Result<Comparison> {
    if a.stream_fingerprint != b.stream_fingerprint {
        return Err(Error::FingerprintMismatch(
            a.stream_fingerprint.clone(),
            b.stream_fingerprint.clone(),
        ));
    }
    let sub = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| q - p).collect() };
    Ok(Comparison {
        method_a: a.method,
        method_b: b.method,
        mean_accuracy_delta: b.mean_accuracy - a.mean_accuracy,
        domain_accuracy_delta: sub(&a.domain_accuracy, &b.domain_accuracy),
        round_accuracy_delta: sub(&a.round_accuracy, &b.round_accuracy),
        adapted_fraction_delta: b.adapted_fraction - a.adapted_fraction,
        adapted_per_round_delta: a
            .adapted_per_round
            .iter()
            .zip(&b.adapted_per_round)
            .map(|(p, q)| *q as i64 - *p as i64)
            .collect(),
        forward_passes_delta: b.forward_passes as i64 - a.forward_passes as i64,
    })
}

impl Comparison {
    pub fn is_zero(&self) -> bool {
        self.mean_accuracy_delta == 0.0
            && self.domain_accuracy_delta.iter().all(|d| *d == 0.0)
            && self.round_accuracy_delta.iter().all(|d| *d == 0.0)
            && self.adapted_fraction_delta == 0.0
            && self.adapted_per_round_delta.iter().all(|d| *d == 0)
            && self.forward_passes_delta == 0
    }
}
