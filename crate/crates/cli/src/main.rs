mod commands;
mod io;

use anyhow::Result;
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "dispflow", version, about = "Flow-monotonicity experiments for sharp dispersive inequalities")]
struct Cli {
    /// TOML file whose `[<command>]` section supplies defaults for the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for reports and traces.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form constants for one family.
    Constants(commands::ConstantsArgs),
    /// Q(t) trace for a theorem on one datum.
    Trace(commands::TraceArgs),
    /// Alternating-difference check of a trace CSV.
    Cm(commands::CmArgs),
    /// Monte Carlo mass of the delta measure against its closed form.
    Lemma(commands::LemmaArgs),
    /// Q'(t) from the duality identity against a centred difference.
    PdeDuality(commands::DualityArgs),
    /// Smallest constant keeping every corpus trace nonincreasing.
    FindC(commands::FindCArgs),
    /// Surface constant and extension traces.
    SteinTomas(commands::SteinTomasArgs),
    /// Plane-transform norm against the Coulomb form over a corpus.
    KineticDrury(commands::DruryArgs),
    /// Transport functional along fast diffusion.
    KineticCcl(commands::CclArgs),
    /// Full acceptance battery; exits nonzero if any criterion fails.
    Suite(commands::SuiteArgs),
}

fn run(cli: Cli) -> Result<bool> {
    let ctx = commands::Context { config: cli.config, out: cli.out };
    match cli.command {
        Command::Constants(a) => commands::constants(&ctx, a),
        Command::Trace(a) => commands::trace(&ctx, a),
        Command::Cm(a) => commands::cm(&ctx, a),
        Command::Lemma(a) => commands::lemma(&ctx, a),
        Command::PdeDuality(a) => commands::pde_duality(&ctx, a),
        Command::FindC(a) => commands::find_c(&ctx, a),
        Command::SteinTomas(a) => commands::stein_tomas(&ctx, a),
        Command::KineticDrury(a) => commands::kinetic_drury(&ctx, a),
        Command::KineticCcl(a) => commands::kinetic_ccl(&ctx, a),
        Command::Suite(a) => commands::suite(&ctx, a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
