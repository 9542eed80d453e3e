use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use winding_lab::harness::{run, Experiment, ExperimentConfig, Overrides};
use winding_lab::Error;

#[derive(Parser)]
#[command(name = "winding-lab", version, about = "Winding sets and intersection local time of planar Brownian paths")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    /// Output directory (default: `out`, or the config's `out`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate Brownian paths and write them as CSV.
    Simulate(Common),
    /// Winding field of one closed path on a square grid.
    WindingField(Common),
    /// Large-winding areas of one path or one pair.
    Area(Common),
    /// Intersection local time estimates.
    LocalTime(Common),
    /// Gap between nm D_{n,m} and the intersection local time.
    Theorem1(Common),
    /// Monte Carlo means against the analytic limits.
    MeanStudy(Common),
    /// Transport distance between the winding measure and the intersection measure.
    Theorem2(Common),
    /// Piece-decomposition inclusions.
    Sandwich(Common),
    /// Tables of the analytic reference functions.
    Tabulate(Common),
}

impl Command {
    fn split(self) -> (Experiment, Common) {
        match self {
            Command::Simulate(c) => (Experiment::Simulate, c),
            Command::WindingField(c) => (Experiment::WindingField, c),
            Command::Area(c) => (Experiment::Area, c),
            Command::LocalTime(c) => (Experiment::LocalTime, c),
            Command::Theorem1(c) => (Experiment::Theorem1, c),
            Command::MeanStudy(c) => (Experiment::MeanStudy, c),
            Command::Theorem2(c) => (Experiment::Theorem2, c),
            Command::Sandwich(c) => (Experiment::Sandwich, c),
            Command::Tabulate(c) => (Experiment::Tabulate, c),
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Numeric(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let (kind, common) = Cli::parse().command.split();
    let ov = Overrides { seed: common.seed, samples: common.samples, steps: common.steps, out: common.out };
    let result = ExperimentConfig::load(kind, &common.config, &ov).and_then(|cfg| {
        let report = run(&cfg)?;
        report.write(&cfg.out, cfg.record_runtime)?;
        Ok((cfg, report))
    });
    match result {
        Ok((cfg, report)) => {
            eprintln!("{kind}: {} rows written to {} in {:.2} s", report.rows.len(), cfg.out.display(), report.runtime_s);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("winding-lab {kind}: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
