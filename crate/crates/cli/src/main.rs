#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;
mod units;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CliError, Options};
use config::RunConfig;
use output::OutputDir;

#[derive(Parser)]
#[command(
    name = "librotrap",
    version,
    about = "Libration, feedback cooling and contrast models for Paul-trapped nanoparticles"
)]
struct Cli {
    /// TOML run configuration; defaults apply to anything left out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Also run the numeric frequency extraction (`modes`).
    #[arg(long, global = true)]
    validate: bool,
    /// Overrides `sim.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Secular frequencies, Mathieu parameters and thresholds over a shape sweep.
    Modes,
    /// Raw trajectory of a single excited mode.
    Simulate,
    /// Closed-loop parametric feedback cooling.
    Cool,
    /// Threshold temperatures over a shape sweep.
    Thresholds,
    /// Gas-limited steady-state temperatures for both collision models.
    Steadystate,
    /// Contrast over a grid of omega_B T_p and temperature.
    Contrast,
    /// Interferometer phase, splitting and libration frequency.
    Phase,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Modes => "modes",
            Command::Simulate => "simulate",
            Command::Cool => "cool",
            Command::Thresholds => "thresholds",
            Command::Steadystate => "steadystate",
            Command::Contrast => "contrast",
            Command::Phase => "phase",
        }
    }
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(|e| CliError::Config(e.0))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.sim.seed = seed;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {} worker threads: {e}", cli.threads.unwrap_or(0))))?;
    let mut out = OutputDir::new(&cli.out, cli.command.name(), &cfg)?;
    let opts = Options { validate: cli.validate };
    pool.install(|| match cli.command {
        Command::Modes => commands::modes(&cfg, &opts, &mut out),
        Command::Simulate => commands::simulate(&cfg, &mut out),
        Command::Cool => commands::cool(&cfg, &mut out),
        Command::Thresholds => commands::thresholds(&cfg, &mut out),
        Command::Steadystate => commands::steadystate(&cfg, &mut out),
        Command::Contrast => commands::contrast(&cfg, &mut out),
        Command::Phase => commands::phase(&cfg, &mut out),
    })
    .map(|()| out.written.clone())
    .inspect_err(|_| {
        for p in &out.written {
            println!("{}", p.display());
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(files) => {
            for p in files {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("librotrap: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
