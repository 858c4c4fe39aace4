//! Runs every example and checks what it reports.

#[allow(dead_code)]
#[path = "../examples/ablation.rs"]
mod ablation;
#[allow(dead_code)]
#[path = "../examples/cmaes_sphere.rs"]
mod cmaes_sphere;
#[allow(dead_code)]
#[path = "../examples/continual_stream.rs"]
mod continual_stream;
#[allow(dead_code)]
#[path = "../examples/epsilon_sweep.rs"]
mod epsilon_sweep;
#[allow(dead_code)]
#[path = "../examples/fastfood.rs"]
mod fastfood;
#[allow(dead_code)]
#[path = "../examples/fitness.rs"]
mod fitness;
#[allow(dead_code)]
#[path = "../examples/marginal_gain.rs"]
mod marginal_gain;
#[allow(dead_code)]
#[path = "../examples/pretrain.rs"]
mod pretrain;
#[allow(dead_code)]
#[path = "../examples/recurring_domains.rs"]
mod recurring_domains;
#[allow(dead_code)]
#[path = "../examples/run_config.rs"]
mod run_config;
#[allow(dead_code)]
#[path = "../examples/shift_detection.rs"]
mod shift_detection;
#[allow(dead_code)]
#[path = "../examples/vector_bank.rs"]
mod vector_bank;

use pace::bench::Method;

#[test]
fn fastfood_fits_in_a_megabyte() {
    let s = fastfood::run_example().unwrap();
    assert_eq!(s.blocks, 9);
    assert!(s.stored_bytes < 1 << 20);
    assert!(s.dense_bytes > 300 << 20);
    assert_eq!(s.offsets.len(), 256);
}

#[test]
fn cmaes_solves_the_sphere() {
    let (best, evals) = cmaes_sphere::run_example().unwrap();
    assert!(best < 1e-10);
    assert!(evals <= 2000);
}

#[test]
fn pretrained_model_is_accurate() {
    assert!(pretrain::run_example().unwrap() > 95.0);
}

#[test]
fn large_offsets_score_worse() {
    let f = fitness::run_example().unwrap();
    assert!(f.iter().all(|x| x.is_finite()));
    assert!(f[3] > f[2] && f[2] > f[0]);
}

#[test]
fn bank_evicts_the_near_duplicate() {
    let kept = vector_bank::run_example().unwrap();
    assert_eq!(
        kept,
        vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0]
        ]
    );
}

#[test]
fn injected_shifts_are_detected() {
    let s = shift_detection::run_example().unwrap();
    assert!(s.gamma > 0.0);
    assert_eq!(s.hits, s.shifts);
    assert!(s.false_positives <= 1);
}

#[test]
fn pace_beats_the_source_model_with_fewer_updates() {
    let r = continual_stream::run_example().unwrap();
    let (none, always, pace) = (&r[0], &r[1], &r[2]);
    assert!(pace.mean_accuracy() > none.mean_accuracy() + 5.0);
    assert!(pace.adapted_fraction() < always.adapted_fraction());
    assert!(r.iter().all(|x| x.accounting_holds()));
}

#[test]
fn bank_cuts_adaptation_in_later_rounds() {
    let (full, no_bank) = recurring_domains::run_example().unwrap();
    let a = full.adapted_per_round();
    assert!(a[1] < a[0] && a[2] < a[0]);
    assert!(full.adapted_per_round()[1] < no_bank.adapted_per_round()[1]);
}

#[test]
fn every_method_runs() {
    let rows = ablation::run_example().unwrap();
    assert_eq!(rows.len(), Method::ALL.len());
    let noadapt = rows[0].1;
    assert!(rows[1..].iter().all(|r| r.1 > noadapt));
}

#[test]
fn larger_epsilon_adapts_less() {
    let rows = epsilon_sweep::run_example().unwrap();
    assert!(rows.windows(2).all(|w| w[1].2 <= w[0].2));
    assert_eq!(rows[0].2, 1.0);
}

#[test]
fn config_run_writes_comparable_reports() {
    let delta = run_config::run_example().unwrap();
    assert_eq!(delta.method_a, Method::NoAdapt);
    assert!(delta.mean_accuracy_delta > 0.0);
}

#[test]
fn early_steps_buy_the_most_accuracy() {
    let points = marginal_gain::run_example().unwrap();
    assert!(points.last().unwrap().accuracy > points[0].accuracy);
    assert!(points[1].gain_per_second > points.last().unwrap().gain_per_second);
}
