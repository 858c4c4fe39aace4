//! Three rounds of the same domain sequence: with the bank, later rounds
//! warm-start from archived vectors and adapt fewer batches.

use pace::bench::{
    calibrate_bundle_gamma, run_method, standard_controller, Method, RunReport, SourceBundle,
    SourceConfig, StreamConfig,
};
use pace::controller::GammaCalibration;
use pace::model::ArchKind;

pub fn run_example() -> pace::Result<(RunReport, RunReport)> {
    let seed = 1;
    let source = SourceConfig {
        arch: ArchKind::Residual,
        ..SourceConfig::default()
    };
    let stream = StreamConfig::recurring(seed, 3);
    let bundle = SourceBundle::train(stream.base_task, seed, &source)?;
    let mut controller = standard_controller(seed);
    controller.gamma = calibrate_bundle_gamma(&bundle, 64, 1000, &GammaCalibration::default())?;

    let (full, ctl) = run_method(&bundle, &stream, Method::Pace, &controller)?;
    let (no_bank, _) = run_method(&bundle, &stream, Method::PaceV3, &controller)?;
    for r in [&full, &no_bank] {
        println!(
            "{:8} adapted per round {:?}  accuracy per round {:.2?}",
            r.method.as_str(),
            r.adapted_per_round(),
            r.round_accuracy()
        );
    }
    if let Some(ctl) = ctl {
        let from_bank = ctl
            .retrieval_log()
            .iter()
            .filter(|e| e.from_bank.is_some())
            .count();
        println!(
            "{} reinitializations, {} warm-started from the bank ({} entries)",
            ctl.retrieval_log().len(),
            from_bank,
            ctl.bank().len()
        );
    }
    Ok((full, no_bank))
}

fn main() -> pace::Result<()> {
    run_example().map(|_| ())
}
