use std::path::PathBuf;
use std::process::ExitCode;

use bkc_cli::{execute, Kind, RunRequest};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bkc", version, about = "Bosonic Kitaev chain scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Susceptibility matrix and singular values at given drive frequencies.
    Respond(Common),
    /// Periodic-chain bands, eigenvalues, stability and winding numbers.
    Spectrum(Common),
    /// End-to-end gain and phase label over a (phase, |lambda/J|) grid.
    PhaseDiagram(Common),
    /// Steady-state populations and fluctuation spectra.
    Thermal(Common),
    /// Detuning response of the end site and responsivity scaling.
    Sense(Common),
    /// Nonlinear envelope or full-band time evolution.
    Simulate(Common),
    /// Modulation tones and oscillator-bank plan realizing the chain.
    Tones(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed for stochastic drives; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Respond(a) => (Kind::Respond, a),
        Command::Spectrum(a) => (Kind::Spectrum, a),
        Command::PhaseDiagram(a) => (Kind::PhaseDiagram, a),
        Command::Thermal(a) => (Kind::Thermal, a),
        Command::Sense(a) => (Kind::Sense, a),
        Command::Simulate(a) => (Kind::Simulate, a),
        Command::Tones(a) => (Kind::Tones, a),
    };
    let req = RunRequest {
        kind,
        config: args.config,
        out: args.out,
        seed: args.seed,
        threads: args.threads,
    };
    match execute(&req) {
        Ok(manifest) => {
            for d in &manifest.datasets {
                println!("{}  {}", d.sha256, req.out.join(&d.file).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("bkc {}: {e}", kind.as_str());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
