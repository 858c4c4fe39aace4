//! Unsupervised fitness: mean prediction entropy plus the distance between
//! test-batch and source activation statistics.

use crate::model::{ActivationStats, AdaptableModel, Matrix, SourceStats};
use crate::projection::FastfoodProjector;
use crate::{Error, Result};

/// Weight on the statistics-alignment term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitnessConfig {
    lambda: f64,
}

impl FitnessConfig {
    pub const DEFAULT_LAMBDA: f64 = 0.4;
    /// Used for rendition-style streams.
    pub const RENDITION_LAMBDA: f64 = 0.2;

    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!(
                "lambda must be finite and non-negative, got {lambda}"
            )));
        }
        Ok(FitnessConfig { lambda })
    }

    pub fn rendition() -> Self {
        FitnessConfig {
            lambda: Self::RENDITION_LAMBDA,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl Default for FitnessConfig {
    fn default() -> Self {
        FitnessConfig {
            lambda: Self::DEFAULT_LAMBDA,
        }
    }
}

/// `sum(-p ln p) / (B * C)` with `0 ln 0 = 0`.
pub fn entropy_term(probs: &Matrix) -> Result<f64> {
    if probs.as_slice().iter().any(|&p| p < 0.0) {
        return Err(Error::invalid("negative probability"));
    }
    let total: f64 = probs
        .as_slice()
        .iter()
        .map(|&p| if p > 0.0 { -p * p.ln() } else { 0.0 })
        .sum();
    Ok(total / (probs.rows() * probs.cols()) as f64)
}

fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `sum_i ||mu_i - mu_s,i|| + ||sigma_i - sigma_s,i||` over blocks.
pub fn alignment_term(stats: &ActivationStats, source: &SourceStats) -> Result<f64> {
    if stats.means.len() != source.means.len() || stats.stds.len() != source.stds.len() {
        return Err(Error::DimensionMismatch {
            what: "statistics blocks",
            expected: source.means.len(),
            got: stats.means.len(),
        });
    }
    let mut total = 0.0;
    for (pairs, what) in [
        (stats.means.iter().zip(&source.means), "block means"),
        (stats.stds.iter().zip(&source.stds), "block stds"),
    ] {
        for (a, b) in pairs {
            if a.len() != b.len() {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: b.len(),
                    got: a.len(),
                });
            }
            total += l2_distance(a, b);
        }
    }
    Ok(total)
}

/// Fitness of one candidate's forward output; lower is better.
pub fn fitness(
    probs: &Matrix,
    stats: &ActivationStats,
    source: &SourceStats,
    config: &FitnessConfig,
) -> Result<f64> {
    if probs.rows() == 0 || probs.cols() == 0 {
        return Err(Error::invalid("empty probability matrix"));
    }
    let entropy = entropy_term(probs)?;
    let alignment = alignment_term(stats, source)?;
    Ok(entropy + config.lambda * alignment)
}

/// Scores candidate vectors: projects them to normalization offsets, runs
/// the model and applies [`fitness`].
#[derive(Debug, Clone, Copy)]
pub struct CandidateEvaluator<'a> {
    pub model: &'a AdaptableModel,
    pub projector: &'a FastfoodProjector,
    pub source: &'a SourceStats,
    pub config: FitnessConfig,
}

/// Result of evaluating one candidate on one batch.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub probs: Matrix,
    pub stats: ActivationStats,
    /// NaN when the forward pass produced non-finite values.
    pub fitness: f64,
}

impl<'a> CandidateEvaluator<'a> {
    pub fn new(
        model: &'a AdaptableModel,
        projector: &'a FastfoodProjector,
        source: &'a SourceStats,
        config: FitnessConfig,
    ) -> Result<Self> {
        if projector.output_dim() != model.offset_dim() {
            return Err(Error::DimensionMismatch {
                what: "projector output vs model offsets",
                expected: model.offset_dim(),
                got: projector.output_dim(),
            });
        }
        source.check_against(model)?;
        Ok(CandidateEvaluator {
            model,
            projector,
            source,
            config,
        })
    }

    pub fn evaluate(&self, vector: &[f64], batch: &Matrix) -> Result<Evaluation> {
        let offset = self.projector.project(vector)?;
        self.evaluate_offset(&offset, batch)
    }

    /// Same as [`Self::evaluate`] for an already projected offset.
    pub fn evaluate_offset(&self, offset: &[f64], batch: &Matrix) -> Result<Evaluation> {
        let out = self.model.forward(offset, batch)?;
        let fitness = if out.non_finite {
            f64::NAN
        } else {
            fitness(&out.probs, &out.stats, self.source, &self.config)?
        };
        Ok(Evaluation {
            probs: out.probs,
            stats: out.stats,
            fitness,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stats_from(means: Vec<Vec<f64>>, stds: Vec<Vec<f64>>) -> (ActivationStats, SourceStats) {
        let a = ActivationStats {
            means: means.clone(),
            stds: stds.clone(),
            stem_mean: vec![],
            stem_var: vec![],
        };
        let s = SourceStats {
            means,
            stds,
            stem_mean: vec![],
            stem_var: vec![],
            sample_count: 1,
        };
        (a, s)
    }

    #[test]
    fn one_hot_and_matching_stats_give_zero() {
        let probs = Matrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let (a, s) = stats_from(vec![vec![0.5, 1.0]], vec![vec![0.1, 0.2]]);
        assert_eq!(
            fitness(&probs, &a, &s, &FitnessConfig::default()).unwrap(),
            0.0
        );
    }

    #[test]
    fn uniform_probs_closed_form() {
        let c = 5;
        let probs = Matrix::from_rows(&vec![vec![1.0 / c as f64; c]; 4]).unwrap();
        let (a, s) = stats_from(vec![vec![0.0]], vec![vec![1.0]]);
        let f = fitness(&probs, &a, &s, &FitnessConfig::new(0.0).unwrap()).unwrap();
        assert!((f - (c as f64).ln() / c as f64).abs() < 1e-12);
    }

    #[test]
    fn matches_naive_double_loop() {
        let probs = Matrix::from_rows(&[vec![0.7, 0.2, 0.1], vec![0.25, 0.25, 0.5]]).unwrap();
        let stats = ActivationStats {
            means: vec![vec![1.0, 2.0], vec![0.0, -1.0]],
            stds: vec![vec![0.5, 0.5], vec![2.0, 1.0]],
            stem_mean: vec![],
            stem_var: vec![],
        };
        let source = SourceStats {
            means: vec![vec![0.0, 2.0], vec![1.0, 1.0]],
            stds: vec![vec![1.0, 0.5], vec![1.0, 1.0]],
            stem_mean: vec![],
            stem_var: vec![],
            sample_count: 10,
        };
        let mut e = 0.0;
        for r in 0..2 {
            for c in 0..3 {
                let p: f64 = probs.row(r)[c];
                e -= p * p.ln();
            }
        }
        e /= 6.0;
        let mut s = 0.0;
        for i in 0..2 {
            let mut dm = 0.0;
            let mut ds = 0.0;
            for j in 0..2 {
                dm += (stats.means[i][j] - source.means[i][j]).powi(2);
                ds += (stats.stds[i][j] - source.stds[i][j]).powi(2);
            }
            s += dm.sqrt() + ds.sqrt();
        }
        let f = fitness(&probs, &stats, &source, &FitnessConfig::new(0.4).unwrap()).unwrap();
        assert!((f - (e + 0.4 * s)).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(FitnessConfig::new(-0.1).is_err());
        assert!(FitnessConfig::new(f64::NAN).is_err());
        let probs = Matrix::from_rows(&[vec![1.2, -0.2]]).unwrap();
        let (a, s) = stats_from(vec![vec![0.0]], vec![vec![1.0]]);
        assert!(fitness(&probs, &a, &s, &FitnessConfig::default()).is_err());
        let ok = Matrix::from_rows(&[vec![0.5, 0.5]]).unwrap();
        let (_, other) = stats_from(vec![vec![0.0, 1.0]], vec![vec![1.0, 1.0]]);
        assert!(fitness(&ok, &a, &other, &FitnessConfig::default()).is_err());
    }

    proptest! {
        #[test]
        fn non_negative_monotone_and_permutation_invariant(
            raw in proptest::collection::vec(0.01f64..1.0, 12),
            shift in proptest::collection::vec(-1.0f64..1.0, 3),
            lambda in 0.0f64..2.0,
        ) {
            let rows: Vec<Vec<f64>> = raw.chunks(3).map(|c| {
                let t: f64 = c.iter().sum();
                c.iter().map(|x| x / t).collect()
            }).collect();
            let probs = Matrix::from_rows(&rows).unwrap();
            let mut reversed = rows.clone();
            reversed.reverse();
            let permuted = Matrix::from_rows(&reversed).unwrap();
            let (mut a, s) = stats_from(vec![vec![0.0; 3]], vec![vec![1.0; 3]]);
            a.means[0] = shift;

            let lo = FitnessConfig::new(lambda).unwrap();
            let hi = FitnessConfig::new(lambda + 0.5).unwrap();
            let f = fitness(&probs, &a, &s, &lo).unwrap();
            prop_assert!(f >= 0.0);
            prop_assert!((f - fitness(&permuted, &a, &s, &lo).unwrap()).abs() < 1e-12);
            if alignment_term(&a, &s).unwrap() > 0.0 {
                prop_assert!(fitness(&probs, &a, &s, &hi).unwrap() > f);
            }
        }
    }
}
