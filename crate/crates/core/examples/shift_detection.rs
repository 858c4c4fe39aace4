//! Calibrates the shift threshold on clean batches, then feeds the monitor a
//! stream whose stem mean jumps by three source standard deviations every
//! 50 batches.

use pace::bench::{clean_stem_stats, BaseTask, SourceBundle, SourceConfig};
use pace::controller::{calibrate_gamma, GammaCalibration, ShiftMonitor, StemStats};
use pace::model::ArchKind;

pub struct DetectionSummary {
    pub gamma: f64,
    pub shifts: usize,
    pub hits: usize,
    pub false_positives: usize,
    pub stationary: usize,
}

pub fn run_example() -> pace::Result<DetectionSummary> {
    let config = SourceConfig {
        arch: ArchKind::Residual,
        ..SourceConfig::default()
    };
    let bundle = SourceBundle::train(BaseTask::Blobs8, 2, &config)?;
    let clean = clean_stem_stats(&bundle, 64, 1400)?;
    let gamma = calibrate_gamma(&clean[..1000], &GammaCalibration::default())?;
    println!("calibrated gamma {gamma:.4}");

    let sigma: Vec<f64> = bundle.source.stem_var.iter().map(|v| v.sqrt()).collect();
    let mut monitor = ShiftMonitor::new(gamma, 0.8)?;
    let mut s = DetectionSummary {
        gamma,
        shifts: 0,
        hits: 0,
        false_positives: 0,
        stationary: 0,
    };
    // The monitor tracks for a while after every (re)start, as during adaptation.
    let mut tracking = 20;
    let mut level = 0.0;
    for (i, st) in clean[1000..].iter().enumerate() {
        let is_shift = i > 0 && i % 50 == 0;
        if is_shift {
            level = 3.0 - level;
        }
        let mean = st
            .mean
            .iter()
            .zip(&sigma)
            .map(|(m, s)| m + level * s)
            .collect();
        let stats = StemStats::new(mean, st.var.clone())?;
        let u = monitor.score(&stats)?;
        if tracking > 0 {
            monitor.track(&stats)?;
            tracking -= 1;
            continue;
        }
        let detected = monitor.exceeds(u);
        if is_shift {
            s.shifts += 1;
            s.hits += detected as usize;
            println!("batch {i:3}  U {u:8.3}  detected {detected}");
        } else {
            s.stationary += 1;
            s.false_positives += detected as usize;
        }
        if detected {
            monitor.reset(stats);
            tracking = 20;
        }
    }
    println!(
        "{}/{} shifts detected, {} false positives over {} stationary batches",
        s.hits, s.shifts, s.false_positives, s.stationary
    );
    Ok(s)
}

fn main() -> pace::Result<()> {
    run_example().map(|_| ())
}
