use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use feedstab_cli::{run, CliError, Command, LoadedConfig, RunOptions};

#[derive(Parser)]
#[command(name = "feedstab", version, about = "Boundary feedback stabilization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides `output_dir` in the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for forcings and sample points; overrides `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for parallel scans.
    #[arg(long, global = true)]
    parallel: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Open-loop eigenvalues.
    Spectrum,
    /// Boundary lifting matrix (and its fractional-power grid scan).
    DirichletMap,
    /// Rank check, pole placement and feedback assembly.
    Synthesize,
    /// Norm of the closed-loop semigroup over time.
    Simulate,
    /// Maximal-regularity constant scan.
    Maxreg,
    /// Consolidated PASS/FAIL verification.
    Verify,
    /// Spectrum, synthesis and verification in one run.
    Report,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Spectrum => Command::Spectrum,
            Cmd::DirichletMap => Command::DirichletMap,
            Cmd::Synthesize => Command::Synthesize,
            Cmd::Simulate => Command::Simulate,
            Cmd::Maxreg => Command::Maxreg,
            Cmd::Verify => Command::Verify,
            Cmd::Report => Command::Report,
        }
    }
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    let path = cli.config.ok_or_else(|| CliError::Config { line: None, msg: "--config PATH is required".into() })?;
    let cfg = LoadedConfig::load(&path)?;
    if let Some(k) = cli.parallel {
        if k == 0 {
            return Err(CliError::Config { line: None, msg: "--parallel must be at least 1".into() });
        }
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
    let out = cli
        .out
        .or_else(|| cfg.config.output_dir.as_ref().map(|p| cfg.resolve(p)))
        .unwrap_or_else(|| PathBuf::from("out"));
    let opts = RunOptions { out, seed: cli.seed.unwrap_or(cfg.config.seed), parallel: cli.parallel };
    let outcome = run(cli.command.into(), &cfg, &opts)?;
    for f in &outcome.files {
        println!("{}", f.display());
    }
    if let Some(msg) = &outcome.message {
        eprintln!("{msg}");
    }
    Ok(outcome.code)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
