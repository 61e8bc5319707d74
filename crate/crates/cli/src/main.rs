//! `ladder-eit` command-line front end.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ladder_eit::config::{load_config, Overrides, Scenario};
use ladder_eit::report::{emit, render_text};
use ladder_eit::runner::{run, RunOptions};
use ladder_eit::Error;
use log::info;

#[derive(Parser)]
#[command(name = "ladder-eit", version, about = "Four-level ladder EIT spectra with frequency mixing and Floquet driving")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Effective mixing field from the far-detuned field pair
    QfmParams(Common),
    /// Transmission spectrum of one model
    Spectrum(Common),
    /// Bias-field sweep of the sensing protocol
    Sense(Common),
    /// Dual-Floquet spectrum around one sideband, with predictions
    DualFloquet(Common),
    /// Double-ATS splitting and widths over a drive-phase grid
    PhaseSweep(Common),
    /// Closed-form sideband predictions only
    Predict(Common),
    /// Two models on the same grid and their deviation
    Compare(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: the config's output.dir, else out/<verb>)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the number of scan points
    #[arg(long)]
    points: Option<usize>,
    /// Worker threads for scans
    #[arg(long)]
    workers: Option<usize>,
}

impl Command {
    fn split(self) -> (Scenario, Common) {
        match self {
            Command::QfmParams(c) => (Scenario::QfmParams, c),
            Command::Spectrum(c) => (Scenario::Spectrum, c),
            Command::Sense(c) => (Scenario::Sense, c),
            Command::DualFloquet(c) => (Scenario::DualFloquet, c),
            Command::PhaseSweep(c) => (Scenario::PhaseSweep, c),
            Command::Predict(c) => (Scenario::Predict, c),
            Command::Compare(c) => (Scenario::Compare, c),
        }
    }
}

fn execute(scenario: Scenario, args: Common) -> Result<(), Error> {
    if args.workers == Some(0) {
        return Err(Error::InvalidParameter { name: "workers".into(), reason: "must be at least 1".into() });
    }
    let overrides = Overrides {
        scenario: Some(scenario),
        points: args.points,
        out_dir: args.out.as_ref().map(|p| p.display().to_string()),
    };
    let config = load_config(&args.config, &overrides)?;
    let bundle = run(&config, &RunOptions { workers: args.workers })?;
    print!("{}", render_text(&bundle));
    let dir = config.output.dir.clone().map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out").join(scenario.name()));
    for path in emit(&bundle, &dir)? {
        info!("wrote {}", path.display());
    }
    println!("results in {}", dir.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let (scenario, args) = Cli::parse().command.split();
    match execute(scenario, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
