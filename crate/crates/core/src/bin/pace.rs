use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pace::bench::{self, compare, GammaSetting, Method, RunConfig, RunSummary};

#[derive(Parser)]
#[command(
    name = "pace",
    version,
    about = "Backpropagation-free continual test-time adaptation on synthetic streams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method over the configured stream and write its reports.
    Run(RunArgs),
    /// Print the shift threshold calibrated on clean held-out batches.
    CalibrateGamma {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print `b - a` deltas of two run summaries (files or run directories).
    Compare { a: PathBuf, b: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    bank_capacity: Option<usize>,
    #[arg(long)]
    population: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> pace::Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(m) = self.method {
            cfg.method = m;
        }
        if let Some(s) = self.seed {
            cfg.set_seed(s);
        }
        if let Some(e) = self.epsilon {
            cfg.controller.epsilon = e;
        }
        if let Some(g) = self.gamma {
            cfg.gamma = GammaSetting::Fixed(g);
        }
        if let Some(c) = self.bank_capacity {
            cfg.controller.bank_capacity = c;
        }
        if let Some(k) = self.population {
            cfg.controller.population_size = k;
        }
        if let Some(d) = self.dim {
            cfg.controller.dim = d;
        }
        if let Some(out) = &self.out {
            cfg.out = Some(out.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(command: Command) -> pace::Result<()> {
    match command {
        Command::Run(args) => {
            let cfg = args.config()?;
            let outcome = bench::execute(&cfg)?;
            let s = &outcome.summary;
            println!("method          {}", s.method);
            println!("stream          {}", s.stream_fingerprint);
            println!("gamma           {:.6}", s.gamma);
            println!("mean accuracy   {:.2}", s.mean_accuracy);
            for (i, a) in s.domain_accuracy.iter().enumerate() {
                println!("  domain {i:<3}    {a:.2}  ({})", s.domains[i]);
            }
            println!("adapted         {:.1}%", 100.0 * s.adapted_fraction);
            println!("forward passes  {}", s.forward_passes);
            println!("wall seconds    {:.2}", s.wall_seconds);
            if let Some(dir) = &cfg.out {
                println!("wrote {}", dir.display());
            }
        }
        Command::CalibrateGamma { config } => {
            let cfg = RunConfig::load(&config)?;
            let bundle = bench::prepare_bundle(&cfg)?;
            let gamma = bench::calibrate_bundle_gamma(
                &bundle,
                cfg.stream.batch_size,
                cfg.calibration_batches,
                &cfg.calibration,
            )?;
            println!("{gamma}");
        }
        Command::Compare { a, b } => {
            let delta = compare(&RunSummary::load(&a)?, &RunSummary::load(&b)?)?;
            println!("{}", serde_json::to_string_pretty(&delta)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
