//! Scores search vectors on a shifted batch: prediction entropy plus the
//! distance of block statistics from the source statistics.

use pace::bench::{generate_stream, BaseTask, SourceBundle, SourceConfig, StreamConfig};
use pace::fitness::{CandidateEvaluator, FitnessConfig};
use pace::projection::FastfoodProjector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn run_example() -> pace::Result<Vec<f64>> {
    let bundle = SourceBundle::train(BaseTask::Blobs8, 1, &SourceConfig::default())?;
    let stream = StreamConfig::standard(1);
    let batch = generate_stream(&stream)?
        .batch(150)
        .expect("stream has 400 batches")
        .inputs;

    let projector = FastfoodProjector::new(32, bundle.model.offset_dim(), 1)?;
    let evaluator = CandidateEvaluator::new(
        &bundle.model,
        &projector,
        &bundle.source,
        FitnessConfig::new(0.4)?,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut scores = Vec::new();
    for scale in [0.0, 0.1, 1.0, 10.0] {
        let v: Vec<f64> = (0..32)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                scale * z
            })
            .collect();
        let e = evaluator.evaluate(&v, &batch)?;
        println!("|v| ~ {scale:5.1}  fitness {:.4}", e.fitness);
        scores.push(e.fitness);
    }
    Ok(scores)
}

fn main() -> pace::Result<()> {
    run_example().map(|_| ())
}
