//! Synthetic non-stationary classification streams.
//!
//! A base task supplies clean labeled samples; each domain of the stream
//! applies one corruption to freshly drawn clean samples. Labels and domain
//! ids travel with every batch but only the evaluation layer reads them.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::Matrix;
use crate::{Error, Result};

// ChaCha stream ids; per-batch streams are offset by the batch index.
const STREAM_TASK: u64 = 0;
const STREAM_DOMAIN: u64 = 1 << 20;
pub(crate) const STREAM_TRAIN: u64 = 2 << 32;
pub(crate) const STREAM_SOURCE: u64 = 3 << 32;
pub(crate) const STREAM_CALIBRATION: u64 = 4 << 32;
const STREAM_BATCH: u64 = 5 << 32;

pub(crate) fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseTask {
    /// Eight Gaussian classes in 16 dimensions.
    Blobs8,
    /// Four concentric noisy shells in 8 dimensions.
    Rings,
}

impl BaseTask {
    pub fn input_dim(&self) -> usize {
        match self {
            BaseTask::Blobs8 => 16,
            BaseTask::Rings => 8,
        }
    }

    pub fn classes(&self) -> usize {
        match self {
            BaseTask::Blobs8 => 8,
            BaseTask::Rings => 4,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            BaseTask::Blobs8 => "blobs8",
            BaseTask::Rings => "rings",
        }
    }
}

impl FromStr for BaseTask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blobs8" => Ok(BaseTask::Blobs8),
            "rings" => Ok(BaseTask::Rings),
            other => Err(Error::Config(format!("unknown base task {other:?}"))),
        }
    }
}

const BLOB_RADIUS: f64 = 3.2;
const RING_SPACING: f64 = 1.5;
const RING_NOISE: f64 = 0.25;

/// Clean sampler of one base task; class geometry is fixed by the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSampler {
    task: BaseTask,
    centers: Vec<Vec<f64>>,
}

fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

impl TaskSampler {
    pub fn new(task: BaseTask, seed: u64) -> Self {
        let mut rng = seeded(seed, STREAM_TASK);
        let centers = match task {
            BaseTask::Blobs8 => (0..task.classes())
                .map(|_| {
                    let v = gaussian_vec(&mut rng, task.input_dim());
                    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    v.into_iter().map(|x| BLOB_RADIUS * x / norm).collect()
                })
                .collect(),
            BaseTask::Rings => Vec::new(),
        };
        TaskSampler { task, centers }
    }

    pub fn task(&self) -> BaseTask {
        self.task
    }

    /// `n` clean samples with uniformly drawn labels.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> (Matrix, Vec<usize>) {
        let dim = self.task.input_dim();
        let mut data = Vec::with_capacity(n * dim);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let y = rng.random_range(0..self.task.classes());
            let noise = gaussian_vec(rng, dim);
            match self.task {
                BaseTask::Blobs8 => {
                    data.extend(self.centers[y].iter().zip(&noise).map(|(c, e)| c + e));
                }
                BaseTask::Rings => {
                    let dir = gaussian_vec(rng, dim);
                    let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
                    let radius = RING_SPACING * (y + 1) as f64;
                    data.extend(
                        dir.iter()
                            .zip(&noise)
                            .map(|(d, e)| radius * d / norm + RING_NOISE * e),
                    );
                }
            }
            labels.push(y);
        }
        (Matrix::new(n, dim, data).expect("sized above"), labels)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    /// Additive `N(0, s^2)` noise.
    GaussNoise,
    /// Each feature multiplied by `s` or `1/s` (fixed per domain).
    FeatureScale,
    /// Features paired up (fixed per domain) and each pair rotated by `s` radians.
    Rotation,
    /// Each feature independently zeroed with probability `s`.
    Mask,
}

impl CorruptionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CorruptionKind::GaussNoise => "gauss_noise",
            CorruptionKind::FeatureScale => "feature_scale",
            CorruptionKind::Rotation => "rotation",
            CorruptionKind::Mask => "mask",
        }
    }
}

impl fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CorruptionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gauss_noise" => Ok(CorruptionKind::GaussNoise),
            "feature_scale" => Ok(CorruptionKind::FeatureScale),
            "rotation" => Ok(CorruptionKind::Rotation),
            "mask" => Ok(CorruptionKind::Mask),
            other => Err(Error::Config(format!("unknown corruption kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub kind: CorruptionKind,
    pub severity: f64,
    pub batch_count: usize,
    /// Norm of a fixed per-domain translation added after the corruption.
    #[serde(default)]
    pub drift: f64,
}

impl DomainSpec {
    pub fn new(kind: CorruptionKind, severity: f64, batch_count: usize) -> Self {
        DomainSpec {
            kind,
            severity,
            batch_count,
            drift: 0.0,
        }
    }

    pub fn with_drift(self, drift: f64) -> Self {
        DomainSpec { drift, ..self }
    }

    /// `kind:severity:batches[:drift]`, e.g. `gauss_noise:1.5:100:4`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.trim().split(':').map(str::trim).collect();
        let (kind, severity, count, drift) = match parts[..] {
            [k, s, c] => (k, s, c, None),
            [k, s, c, d] => (k, s, c, Some(d)),
            _ => {
                return Err(Error::Config(format!(
                    "domain {text:?} is not kind:severity:batches[:drift]"
                )))
            }
        };
        let drift = match drift {
            None => 0.0,
            Some(d) => d
                .parse()
                .map_err(|_| Error::Config(format!("bad drift in domain {text:?}")))?,
        };
        let severity = severity
            .parse()
            .map_err(|_| Error::Config(format!("bad severity in domain {text:?}")))?;
        let batch_count = count
            .parse()
            .map_err(|_| Error::Config(format!("bad batch count in domain {text:?}")))?;
        Ok(DomainSpec::new(kind.parse()?, severity, batch_count).with_drift(drift))
    }
}

impl fmt::Display for DomainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.kind, self.severity, self.batch_count)?;
        if self.drift != 0.0 {
            write!(f, ":{}", self.drift)?;
        }
        Ok(())
    }
}

/// A corruption instantiated for one domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Corruption {
    kind: CorruptionKind,
    severity: f64,
    factors: Vec<f64>,
    pairs: Vec<(usize, usize)>,
    translation: Vec<f64>,
}

impl Corruption {
    pub fn new(spec: &DomainSpec, dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let s = spec.severity;
        let mut factors = Vec::new();
        let mut pairs = Vec::new();
        match spec.kind {
            CorruptionKind::FeatureScale => {
                factors = (0..dim)
                    .map(|_| if rng.random_bool(0.5) { s } else { 1.0 / s })
                    .collect();
            }
            CorruptionKind::Rotation => {
                let mut order: Vec<usize> = (0..dim).collect();
                order.shuffle(rng);
                pairs = order.chunks_exact(2).map(|c| (c[0], c[1])).collect();
            }
            CorruptionKind::GaussNoise | CorruptionKind::Mask => {}
        }
        let mut translation = Vec::new();
        if spec.drift != 0.0 {
            let u = gaussian_vec(rng, dim);
            let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            translation = u.into_iter().map(|x| spec.drift * x / norm).collect();
        }
        Corruption {
            kind: spec.kind,
            severity: s,
            factors,
            pairs,
            translation,
        }
    }

    pub fn kind(&self) -> CorruptionKind {
        self.kind
    }

    pub fn apply<R: Rng + ?Sized>(&self, x: &mut Matrix, rng: &mut R) {
        let s = self.severity;
        for r in 0..x.rows() {
            let row = x.row_mut(r);
            match self.kind {
                CorruptionKind::GaussNoise => {
                    for v in row.iter_mut() {
                        let e: f64 = StandardNormal.sample(rng);
                        *v += s * e;
                    }
                }
                CorruptionKind::FeatureScale => {
                    for (v, f) in row.iter_mut().zip(&self.factors) {
                        *v *= f;
                    }
                }
                CorruptionKind::Rotation => {
                    let (sin, cos) = s.sin_cos();
                    for &(i, j) in &self.pairs {
                        let (a, b) = (row[i], row[j]);
                        row[i] = cos * a - sin * b;
                        row[j] = sin * a + cos * b;
                    }
                }
                CorruptionKind::Mask => {
                    for v in row.iter_mut() {
                        if rng.random_bool(s) {
                            *v = 0.0;
                        }
                    }
                }
            }
            for (v, t) in row.iter_mut().zip(&self.translation) {
                *v += t;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig {
    pub base_task: BaseTask,
    pub domains: Vec<DomainSpec>,
    pub batch_size: usize,
    /// Number of passes over the domain sequence.
    pub rounds: usize,
    pub seed: u64,
}

impl StreamConfig {
    /// Four corrupted 8-class blob domains of 100 batches each.
    pub fn standard(seed: u64) -> Self {
        StreamConfig {
            base_task: BaseTask::Blobs8,
            domains: standard_domains(100),
            batch_size: 64,
            rounds: 1,
            seed,
        }
    }

    /// The standard sequence repeated for `rounds` rounds.
    pub fn recurring(seed: u64, rounds: usize) -> Self {
        StreamConfig {
            rounds,
            ..StreamConfig::standard(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.domains.is_empty() {
            return Err(Error::Config("stream needs at least one domain".into()));
        }
        if self.batch_size == 0 || self.rounds == 0 {
            return Err(Error::Config(
                "batch size and rounds must be positive".into(),
            ));
        }
        for d in &self.domains {
            if d.batch_count == 0 {
                return Err(Error::Config(format!("domain {d} has no batches")));
            }
            if !(d.severity > 0.0 && d.severity.is_finite()) {
                return Err(Error::Config(format!(
                    "domain {d} needs a positive severity"
                )));
            }
            if !d.drift.is_finite() {
                return Err(Error::Config(format!("domain {d} has a non-finite drift")));
            }
            if d.kind == CorruptionKind::Mask && d.severity > 1.0 {
                return Err(Error::Config(format!("mask probability above 1 in {d}")));
            }
        }
        Ok(())
    }

    pub fn batches_per_round(&self) -> usize {
        self.domains.iter().map(|d| d.batch_count).sum()
    }

    pub fn total_batches(&self) -> usize {
        self.rounds * self.batches_per_round()
    }
}

/// Drift norm of every standard domain.
pub const STANDARD_DRIFT: f64 = 5.0;

/// The four corruption families at moderate severity, each with a fixed
/// per-domain drift of norm [`STANDARD_DRIFT`].
pub fn standard_domains(batch_count: usize) -> Vec<DomainSpec> {
    [
        (CorruptionKind::GaussNoise, 0.5),
        (CorruptionKind::FeatureScale, 1.5),
        (CorruptionKind::Rotation, 0.3),
        (CorruptionKind::Mask, 0.15),
    ]
    .into_iter()
    .map(|(kind, severity)| DomainSpec::new(kind, severity, batch_count).with_drift(STANDARD_DRIFT))
    .collect()
}

/// One test batch with its hidden evaluation tags.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBatch {
    pub index: usize,
    pub round: usize,
    /// Position of the domain in the sequence; repeats every round.
    pub domain: usize,
    pub inputs: Matrix,
    pub labels: Vec<usize>,
}

/// Deterministic iterator over the batches of a [`StreamConfig`].
#[derive(Debug, Clone)]
pub struct Stream {
    config: StreamConfig,
    sampler: TaskSampler,
    corruptions: Vec<Corruption>,
    next: usize,
    // (round, domain) of every batch.
    schedule: Vec<(usize, usize)>,
}

pub fn generate_stream(config: &StreamConfig) -> Result<Stream> {
    config.validate()?;
    let sampler = TaskSampler::new(config.base_task, config.seed);
    let dim = config.base_task.input_dim();
    let corruptions = config
        .domains
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            Corruption::new(
                spec,
                dim,
                &mut seeded(config.seed, STREAM_DOMAIN + i as u64),
            )
        })
        .collect();
    let mut schedule = Vec::with_capacity(config.total_batches());
    for round in 0..config.rounds {
        for (domain, spec) in config.domains.iter().enumerate() {
            schedule.extend(std::iter::repeat_n((round, domain), spec.batch_count));
        }
    }
    Ok(Stream {
        config: config.clone(),
        sampler,
        corruptions,
        next: 0,
        schedule,
    })
}

impl Stream {
    pub fn config(&self) -> &StreamConfig {
        &self.config
    }

    pub fn batch(&self, index: usize) -> Option<LabeledBatch> {
        let &(round, domain) = self.schedule.get(index)?;
        let mut rng = seeded(self.config.seed, STREAM_BATCH + index as u64);
        let (mut inputs, labels) = self.sampler.sample(self.config.batch_size, &mut rng);
        self.corruptions[domain].apply(&mut inputs, &mut rng);
        Some(LabeledBatch {
            index,
            round,
            domain,
            inputs,
            labels,
        })
    }
}

impl Iterator for Stream {
    type Item = LabeledBatch;

    fn next(&mut self) -> Option<LabeledBatch> {
        let b = self.batch(self.next)?;
        self.next += 1;
        Some(b)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.schedule.len() - self.next;
        (left, Some(left))
    }
}

impl ExactSizeIterator for Stream {}

/// SHA-256 over the stream's inputs, labels and domain tags.
pub fn stream_fingerprint(config: &StreamConfig) -> Result<String> {
    let mut hasher = Sha256::new();
    for b in generate_stream(config)? {
        hasher.update((b.domain as u64).to_le_bytes());
        for x in b.inputs.as_slice() {
            hasher.update(x.to_le_bytes());
        }
        for &y in &b.labels {
            hasher.update((y as u64).to_le_bytes());
        }
    }
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column_means(m: &Matrix) -> Vec<f64> {
        let mut out = vec![0.0; m.cols()];
        for row in m.iter_rows() {
            for (o, x) in out.iter_mut().zip(row) {
                *o += x / m.rows() as f64;
            }
        }
        out
    }

    #[test]
    fn unit_feature_scale_is_identity() {
        let spec = DomainSpec::new(CorruptionKind::FeatureScale, 1.0, 1);
        let c = Corruption::new(&spec, 16, &mut seeded(0, 9));
        let sampler = TaskSampler::new(BaseTask::Blobs8, 3);
        let (clean, _) = sampler.sample(200, &mut seeded(3, 77));
        let mut x = clean.clone();
        c.apply(&mut x, &mut seeded(3, 78));
        assert_eq!(x, clean);
    }

    #[test]
    fn unit_scale_stream_passes_two_sample_mean_test() {
        let sampler = TaskSampler::new(BaseTask::Blobs8, 5);
        let spec = DomainSpec::new(CorruptionKind::FeatureScale, 1.0, 1);
        let c = Corruption::new(&spec, 16, &mut seeded(5, 1));
        let (a, _) = sampler.sample(4000, &mut seeded(5, 100));
        let (mut b, _) = sampler.sample(4000, &mut seeded(5, 200));
        c.apply(&mut b, &mut seeded(5, 201));
        // Per-feature spread is at most sqrt(1 + 3.2^2) < 3.4.
        let se = 3.4 * (2.0 / 4000.0f64).sqrt();
        for (ma, mb) in column_means(&a).iter().zip(column_means(&b)) {
            assert!((ma - mb).abs() < 4.5 * se, "{ma} vs {mb}");
        }
    }

    #[test]
    fn stream_is_deterministic() {
        let cfg = StreamConfig {
            domains: standard_domains(3),
            ..StreamConfig::standard(11)
        };
        let a: Vec<_> = generate_stream(&cfg).unwrap().collect();
        let b: Vec<_> = generate_stream(&cfg).unwrap().collect();
        assert_eq!(a, b);
        assert_eq!(
            stream_fingerprint(&cfg).unwrap(),
            stream_fingerprint(&cfg).unwrap()
        );
        let other = StreamConfig { seed: 12, ..cfg };
        assert_ne!(
            stream_fingerprint(&other).unwrap(),
            stream_fingerprint(&StreamConfig::standard(11)).unwrap()
        );
    }

    #[test]
    fn rounds_repeat_domains_with_period() {
        let cfg = StreamConfig {
            domains: standard_domains(2),
            rounds: 5,
            ..StreamConfig::standard(0)
        };
        let batches: Vec<_> = generate_stream(&cfg).unwrap().collect();
        assert_eq!(batches.len(), 5 * 8);
        for (i, b) in batches.iter().enumerate() {
            assert_eq!(b.index, i);
            assert_eq!(b.domain, (i / 2) % 4);
            assert_eq!(b.round, i / 8);
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!("blur".parse::<CorruptionKind>().is_err());
        assert!(DomainSpec::parse("blur:1:10").is_err());
        assert!(DomainSpec::parse("mask:0.2").is_err());
        let mut cfg = StreamConfig::standard(0);
        cfg.domains[0].batch_count = 0;
        assert!(generate_stream(&cfg).is_err());
        let mut cfg = StreamConfig::standard(0);
        cfg.domains[1].severity = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = StreamConfig::standard(0);
        cfg.domains[3].severity = 1.5;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn domain_spec_round_trips_through_text() {
        let d = DomainSpec::parse(" rotation : 0.6 : 40 ").unwrap();
        assert_eq!(d, DomainSpec::new(CorruptionKind::Rotation, 0.6, 40));
        assert_eq!(DomainSpec::parse(&d.to_string()).unwrap(), d);
    }

    #[test]
    fn rings_have_requested_shape() {
        let s = TaskSampler::new(BaseTask::Rings, 0);
        let (x, y) = s.sample(50, &mut seeded(0, 3));
        assert_eq!((x.rows(), x.cols()), (50, 8));
        assert!(y.iter().all(|&c| c < 4));
    }
}
