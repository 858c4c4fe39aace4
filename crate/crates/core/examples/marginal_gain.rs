//! Accuracy gained per second of adaptation for growing step budgets. Most
//! of the gain comes early in a domain, which is what adaptation stopping
//! exploits.

use pace::bench::{
    marginal_gain_curve, standard_controller, BudgetPoint, SourceBundle, SourceConfig, StreamConfig,
};
use pace::model::ArchKind;

pub fn run_example() -> pace::Result<Vec<BudgetPoint>> {
    let seed = 2;
    let source = SourceConfig {
        arch: ArchKind::Residual,
        ..SourceConfig::default()
    };
    let stream = StreamConfig::standard(seed);
    let bundle = SourceBundle::train(stream.base_task, seed, &source)?;
    let points = marginal_gain_curve(
        &bundle,
        &stream,
        &standard_controller(seed),
        &[0, 5, 10, 20, 40, 70],
        20,
    )?;
    println!(
        "{:>6} {:>9} {:>9} {:>14}",
        "steps", "acc", "seconds", "gain per sec"
    );
    for p in &points {
        println!(
            "{:6} {:9.2} {:9.3} {:14.2}",
            p.steps, p.accuracy, p.seconds, p.gain_per_second
        );
    }
    Ok(points)
}

fn main() -> pace::Result<()> {
    run_example().map(|_| ())
}
