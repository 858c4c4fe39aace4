//! Every method preset on the standard stream for one seed.

use pace::bench::{
    calibrate_bundle_gamma, run_method, standard_controller, Method, SourceBundle, SourceConfig,
    StreamConfig,
};
use pace::controller::GammaCalibration;
use pace::model::ArchKind;

pub fn run_example() -> pace::Result<Vec<(Method, f64, f64)>> {
    let seed = 4;
    let source = SourceConfig {
        arch: ArchKind::Residual,
        ..SourceConfig::default()
    };
    let stream = StreamConfig::standard(seed);
    let bundle = SourceBundle::train(stream.base_task, seed, &source)?;
    let mut controller = standard_controller(seed);
    controller.gamma = calibrate_bundle_gamma(&bundle, 64, 1000, &GammaCalibration::default())?;

    println!(
        "{:12} {:>8} {:>9} {:>8}",
        "method", "acc", "adapted", "seconds"
    );
    let mut rows = Vec::new();
    for method in Method::ALL {
        let (r, _) = run_method(&bundle, &stream, method, &controller)?;
        println!(
            "{:12} {:8.2} {:8.1}% {:8.2}",
            method.as_str(),
            r.mean_accuracy(),
            100.0 * r.adapted_fraction(),
            r.wall_seconds
        );
        rows.push((method, r.mean_accuracy(), r.adapted_fraction()));
    }
    Ok(rows)
}

fn main() -> pace::Result<()> {
    run_example().map(|_| ())
}
