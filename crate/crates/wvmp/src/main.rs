use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use wvmp::commands::{self, LearnOverrides, Outcome};
use wvmp::{output, CliError, ConfigError, ExperimentConfig};
use wvmp_core::learning::{Protocol, Theorem};

#[derive(Parser)]
#[command(name = "wvmp", version, about = "Weak-value learning experiments under noise")]
struct Cli {
    /// JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; defaults to the config's `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Exit with status 4 if any built-in check fails.
    #[arg(long = "assert", global = true)]
    assert_checks: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TheoremArg {
    T1,
    T2,
    T3,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    Wvmp,
    Strong,
    StrongPostselect,
}

#[derive(Subcommand)]
enum Command {
    /// Ideal and noisy weak values with first-order bias.
    Weakvalue,
    /// Reconstruction error across the gamma grid.
    BiasSweep,
    /// Reconstruct an observable at one noise level.
    Learn {
        #[arg(long, value_enum)]
        theorem: Option<TheoremArg>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, value_enum)]
        protocol: Option<ProtocolArg>,
    },
    /// Simulate a von Neumann probe readout.
    Protocol,
    /// Joint Lindblad evolution versus the factorized model.
    Lindblad,
    /// Monte Carlo bias statistics over Haar-random unitary noise.
    Haar,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| ConfigError::new("--config", "a config file is required"))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new("--config", format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if let Some(seed) = cli.seed {
        cfg.override_seed(seed);
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load(cli)?;
    let outcome: Outcome = match &cli.command {
        Command::Weakvalue => commands::weakvalue(&cfg)?,
        Command::BiasSweep => commands::bias_sweep(&cfg)?,
        Command::Learn { theorem, gamma, protocol } => {
            let over = LearnOverrides {
                theorem: theorem.map(|t| match t {
                    TheoremArg::T1 => Theorem::T1Pauli,
                    TheoremArg::T2 => Theorem::T2Unital,
                    TheoremArg::T3 => Theorem::T3AdPd,
                }),
                gamma: *gamma,
                protocol: protocol.map(|p| match p {
                    ProtocolArg::Wvmp => Protocol::Wvmp,
                    ProtocolArg::Strong => Protocol::Strong,
                    ProtocolArg::StrongPostselect => Protocol::StrongPostselect,
                }),
            };
            commands::learn(&cfg, over)?
        }
        Command::Protocol => commands::protocol(&cfg)?,
        Command::Lindblad => commands::lindblad(&cfg)?,
        Command::Haar => commands::haar(&cfg)?,
    };
    for line in &outcome.lines {
        println!("{line}");
    }
    let dir = match &cli.out {
        Some(d) => Some(d.clone()),
        None => cfg.output_dir()?,
    };
    if let Some(dir) = dir {
        for path in output::write_all(&dir, &outcome.artifacts)? {
            println!("wrote {}", path.display());
        }
    }
    if cli.assert_checks {
        let failed = outcome.failed_checks();
        if !failed.is_empty() {
            return Err(CliError::AssertFailed(failed.join("; ")));
        }
        println!("all checks passed ({})", outcome.checks.len());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
