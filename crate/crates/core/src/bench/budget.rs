//! Marginal accuracy gain per unit of adaptation time.
//!
//! For each domain of the first round, a fresh search adapts on the leading
//! batches of the domain. After every budget of steps the search mean is
//! scored on the domain's trailing held-out batches. Accuracy is averaged over
//! domains and the gain of each budget interval is divided by the extra
//! adaptation time it took.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::runner::SourceBundle;
use super::stream::{generate_stream, StreamConfig};
use crate::cmaes::{CmaesState, RankedCandidate};
use crate::controller::ControllerConfig;
use crate::fitness::{CandidateEvaluator, FitnessConfig};
use crate::model::accuracy;
use crate::projection::FastfoodProjector;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetPoint {
    pub steps: usize,
    /// Mean held-out accuracy over domains with the search mean applied.
    pub accuracy: f64,
    /// Mean adaptation seconds per domain to reach `steps`.
    pub seconds: f64,
    /// Accuracy gain over the previous budget per extra second; NaN for the
    /// first point.
    pub gain_per_second: f64,
}

pub fn marginal_gain_curve(
    bundle: &SourceBundle,
    stream: &StreamConfig,
    config: &ControllerConfig,
    budgets: &[usize],
    eval_batches: usize,
) -> Result<Vec<BudgetPoint>> {
    if budgets.is_empty() || budgets.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("budgets must be strictly increasing".into()));
    }
    let max_steps = *budgets.last().expect("non-empty");
    if let Some(d) = stream
        .domains
        .iter()
        .find(|d| d.batch_count < max_steps + eval_batches)
    {
        return Err(Error::Config(format!(
            "domain {d} is too short for {max_steps} steps plus {eval_batches} held-out batches"
        )));
    }
    let single = StreamConfig {
        rounds: 1,
        ..stream.clone()
    };
    let batches: Vec<_> = generate_stream(&single)?.collect();
    let projector =
        FastfoodProjector::new(config.dim, bundle.model.offset_dim(), config.projector_seed)?;
    let evaluator = CandidateEvaluator::new(
        &bundle.model,
        &projector,
        &bundle.source,
        FitnessConfig::new(config.lambda)?,
    )?;

    let domains = stream.domains.len();
    let mut acc = vec![0.0; budgets.len()];
    let mut secs = vec![0.0; budgets.len()];
    for d in 0..domains {
        let domain: Vec<_> = batches.iter().filter(|b| b.domain == d).collect();
        let held_out = &domain[domain.len() - eval_batches..];
        let score = |mean: &[f64]| -> Result<f64> {
            let offset = projector.project(mean)?;
            let mut total = 0.0;
            for b in held_out {
                total += accuracy(&bundle.model.forward(&offset, &b.inputs)?.probs, &b.labels);
            }
            Ok(total / held_out.len() as f64)
        };

        let mut es = CmaesState::new(vec![0.0; config.dim], config.tau0, config.population_size)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.sampling_seed);
        let mut elapsed = 0.0;
        let mut next = 0;
        for (step, batch) in domain.iter().enumerate().take(max_steps + 1) {
            if step == budgets[next] {
                acc[next] += score(es.mean())?;
                secs[next] += elapsed;
                next += 1;
                if next == budgets.len() {
                    break;
                }
            }
            let start = Instant::now();
            let ranked = es
                .sample_population(&mut rng)
                .into_iter()
                .map(|v| {
                    let f = evaluator.evaluate(&v, &batch.inputs)?.fitness;
                    Ok(RankedCandidate::new(v, f))
                })
                .collect::<Result<Vec<_>>>()?;
            es.update(&ranked)?;
            elapsed += start.elapsed().as_secs_f64();
        }
    }

    let n = domains as f64;
    let mut points: Vec<BudgetPoint> = budgets
        .iter()
        .zip(acc.iter().zip(&secs))
        .map(|(&steps, (a, s))| BudgetPoint {
            steps,
            accuracy: a / n,
            seconds: s / n,
            gain_per_second: f64::NAN,
        })
        .collect();
    for i in 1..points.len() {
        let dt = points[i].seconds - points[i - 1].seconds;
        points[i].gain_per_second = (points[i].accuracy - points[i - 1].accuracy) / dt;
    }
    Ok(points)
}
