use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use focklens_cli::config::{Command, Overrides};
use focklens_cli::error::HarnessError;

#[derive(Parser)]
#[command(name = "focklens", version, about = "Fock-space lens experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Log progress to stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Cmd {
    /// Time-resolved Kerr-then-drive run (fig1b, fig1c).
    Evolve(RunArgs),
    /// Peak probability over curvature and drive time (fig1d).
    SweepFocus(RunArgs),
    /// Optimize lens groups (fig2b).
    Optimize(RunArgs),
    /// Optimize over photon numbers and fit power laws (fig2c, fig3c).
    Scaling(RunArgs),
    /// Lossy trajectories of an optimized lens (fig3d).
    Trajectories(RunArgs),
    /// Fit power laws to an existing table.
    Fit(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration document.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();

    let (command, args) = match cli.command {
        Cmd::Evolve(a) => (Command::Evolve, a),
        Cmd::SweepFocus(a) => (Command::SweepFocus, a),
        Cmd::Optimize(a) => (Command::Optimize, a),
        Cmd::Scaling(a) => (Command::Scaling, a),
        Cmd::Trajectories(a) => (Command::Trajectories, a),
        Cmd::Fit(a) => (Command::Fit, a),
    };
    let overrides = Overrides {
        seed: args.seed,
        workers: args.workers,
        out_dir: args.out_dir.clone(),
    };
    match focklens_cli::run_file(command, &args.config, &overrides) {
        Ok(manifest) => {
            for output in &manifest.outputs {
                println!("{}  {}", output.sha256, output.file);
            }
            ExitCode::SUCCESS
        }
        Err(error) => report(&error, args.out_dir.as_deref()),
    }
}

fn report(error: &HarnessError, out_dir: Option<&Path>) -> ExitCode {
    if let Some(dir) = out_dir {
        focklens_cli::write_error_record(dir, error);
    }
    eprintln!("{}", error.record());
    ExitCode::from(error.exit_code() as u8)
}
