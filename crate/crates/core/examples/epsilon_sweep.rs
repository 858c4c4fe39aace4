//! Sweeps the stopping threshold: larger values stop sooner and adapt fewer
//! batches.

use pace::bench::{
    calibrate_bundle_gamma, run_method, standard_controller, Method, SourceBundle, SourceConfig,
    StreamConfig,
};
use pace::controller::GammaCalibration;
use pace::model::ArchKind;

pub fn run_example() -> pace::Result<Vec<(f64, f64, f64)>> {
    let seed = 3;
    let source = SourceConfig {
        arch: ArchKind::Residual,
        ..SourceConfig::default()
    };
    let stream = StreamConfig::standard(seed);
    let bundle = SourceBundle::train(stream.base_task, seed, &source)?;
    let mut controller = standard_controller(seed);
    controller.gamma = calibrate_bundle_gamma(&bundle, 64, 1000, &GammaCalibration::default())?;

    let mut rows = Vec::new();
    for epsilon in [0.0, 0.045, 0.09, 0.2, f64::INFINITY] {
        controller.epsilon = epsilon;
        let (r, _) = run_method(&bundle, &stream, Method::Pace, &controller)?;
        println!(
            "epsilon {epsilon:6}  acc {:6.2}  adapted {:5.1}%",
            r.mean_accuracy(),
            100.0 * r.adapted_fraction()
        );
        rows.push((epsilon, r.mean_accuracy(), r.adapted_fraction()));
    }
    Ok(rows)
}

fn main() -> pace::Result<()> {
    run_example().map(|_| ())
}
