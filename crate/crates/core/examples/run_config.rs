//! Drives a run from a flat config, writes the report files and compares
//! two methods on the same stream.

use pace::bench::{compare, execute, Comparison, Method, RunConfig, RunSummary};

const CONFIG: &str = "
method = noadapt
seed = 5
domains = rotation:0.3:30:5, mask:0.15:30:5
arch = residual
calibration_batches = 300
";

pub fn run_example() -> pace::Result<Comparison> {
    let out = std::env::temp_dir().join(format!("pace-run-config-{}", std::process::id()));
    let mut config = RunConfig::parse(CONFIG)?;
    config.out = Some(out.join("noadapt"));
    execute(&config)?;
    config.method = Method::Pace;
    config.out = Some(out.join("pace"));
    execute(&config)?;

    for entry in std::fs::read_dir(out.join("pace"))? {
        println!("wrote {}", entry?.path().display());
    }
    let delta = compare(
        &RunSummary::load(&out.join("noadapt"))?,
        &RunSummary::load(&out.join("pace"))?,
    )?;
    println!("{}", serde_json::to_string_pretty(&delta)?);
    std::fs::remove_dir_all(&out)?;
    Ok(delta)
}

fn main() -> pace::Result<()> {
    run_example().map(|_| ())
}
