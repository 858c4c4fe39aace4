//! The source model, always-on adaptation and full PACE on the standard
//! drifting four-domain stream.

use pace::bench::{
    calibrate_bundle_gamma, run_method, standard_controller, Method, RunReport, SourceBundle,
    SourceConfig, StreamConfig,
};
use pace::controller::GammaCalibration;
use pace::model::ArchKind;

pub fn run_example() -> pace::Result<Vec<RunReport>> {
    let seed = 0;
    let source = SourceConfig {
        arch: ArchKind::Residual,
        ..SourceConfig::default()
    };
    let stream = StreamConfig::standard(seed);
    let bundle = SourceBundle::train(stream.base_task, seed, &source)?;
    let mut controller = standard_controller(seed);
    controller.gamma = calibrate_bundle_gamma(&bundle, 64, 1000, &GammaCalibration::default())?;

    let mut reports = Vec::new();
    for method in [Method::NoAdapt, Method::PaceAlways, Method::Pace] {
        let (report, _) = run_method(&bundle, &stream, method, &controller)?;
        let domains: Vec<String> = report
            .domain_accuracy()
            .iter()
            .map(|a| format!("{a:5.1}"))
            .collect();
        println!(
            "{:12} acc {:6.2}  per domain [{}]  adapted {:5.1}%  forward passes {}",
            method.as_str(),
            report.mean_accuracy(),
            domains.join(" "),
            100.0 * report.adapted_fraction(),
            report.forward_passes()
        );
        reports.push(report);
    }
    let shifts: Vec<u64> = reports[2]
        .records
        .iter()
        .filter(|r| r.report.shift_detected)
        .map(|r| r.report.batch_index)
        .collect();
    println!("shifts detected at batches {shifts:?}");
    Ok(reports)
}

fn main() -> pace::Result<()> {
    run_example().map(|_| ())
}
