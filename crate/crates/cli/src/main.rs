use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use visclimit_cli::config::parse_eps_list;
use visclimit_cli::{execute, parse_config, CliError, Experiment};

#[derive(Parser)]
#[command(
    name = "visclimit",
    version,
    about = "Viscous chemotaxis conservation-law experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment configuration (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated epsilon ladder; overrides `eps_ladder`.
    #[arg(long)]
    eps: Option<String>,
    /// Suppress the summary on stdout.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory and write state and diagnostics CSVs.
    Run(Common),
    /// Run the epsilon ladder and fit the convergence slope.
    Converge(Common),
    /// Entropy dissipation, entropy identity residual and positivity floor.
    EntropyCheck(Common),
    /// Grid self-convergence at fixed epsilon.
    SelfConverge(Common),
    /// Keller-Segel transform: parameter scaling and residual of a trajectory.
    Transform(Common),
}

fn main() -> ExitCode {
    match try_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err
                .downcast_ref::<CliError>()
                .map_or(2, CliError::exit_code);
            ExitCode::from(code)
        }
    }
}

fn try_main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let (experiment, common) = match cli.command {
        Command::Run(c) => (Experiment::Run, c),
        Command::Converge(c) => (Experiment::Converge, c),
        Command::EntropyCheck(c) => (Experiment::EntropyCheck, c),
        Command::SelfConverge(c) => (Experiment::SelfConverge, c),
        Command::Transform(c) => (Experiment::Transform, c),
    };
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| CliError::Validation(format!("{}: {e}", common.config.display())))?;
    let mut cfg = parse_config(&text)
        .map_err(|e| CliError::Validation(e.to_string()))
        .with_context(|| format!("reading {}", common.config.display()))?;
    cfg.experiment = experiment;
    if let Some(out) = common.out {
        cfg.out_dir = out;
    }
    if let Some(eps) = common.eps {
        cfg = parse_eps_list(&eps)
            .and_then(|list| cfg.with_eps_ladder(list))
            .map_err(|e| CliError::Validation(format!("--eps: {e}")))?;
    }
    let outcome = execute(&cfg)?;
    if !common.quiet {
        for line in &outcome.lines {
            println!("{line}");
        }
        println!("artifacts in {}", cfg.out_dir.display());
    }
    Ok(())
}
