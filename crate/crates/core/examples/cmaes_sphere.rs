//! Minimizes a 10-dimensional sphere with the ask/tell CMA-ES loop.

use pace::cmaes::{CmaesState, RankedCandidate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> pace::Result<(f64, usize)> {
    let sphere = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
    let mut es = CmaesState::new(vec![1.0; 10], 0.5, 10)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut evals = 0;
    let mut best = f64::INFINITY;
    while best >= 1e-10 && evals < 2000 {
        let ranked: Vec<RankedCandidate> = es
            .sample_population(&mut rng)
            .into_iter()
            .map(|x| {
                let f = sphere(&x);
                RankedCandidate::new(x, f)
            })
            .collect();
        evals += ranked.len();
        best = ranked.iter().map(|c| c.fitness).fold(best, f64::min);
        es.update(&ranked)?;
        if es.iteration() % 20 == 0 {
            println!(
                "iter {:3}  best {best:.3e}  sigma {:.3e}",
                es.iteration(),
                es.step_size()
            );
        }
    }
    println!("reached {best:.3e} after {evals} evaluations");
    Ok((best, evals))
}

fn main() -> pace::Result<()> {
    run_example().map(|_| ())
}
