use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use reachmac_cli::{cmd_all, cmd_calibrate, cmd_collect, cmd_estimate, cmd_predict, cmd_validate, CliError, RunConfig, Settings};

#[derive(Parser)]
#[command(name = "reachmac", version, about = "Mean age at childbearing from advertising audience counts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML file with the same keys as the flags (underscored); flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Fetch audience counts into <out>/snapshots.
    Collect,
    /// Compute MAC per country and sex.
    Estimate,
    /// Compare with reference MAC, raw and leave-one-out.
    Validate,
    /// Fit the calibration regression.
    Calibrate,
    /// Predict MAC where no reference value exists.
    Predict,
    /// Run every stage.
    All,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let settings = match &cli.config {
        Some(path) => cli.settings.or(Settings::from_file(path)?),
        None => cli.settings,
    };
    let cfg = RunConfig::try_from(settings)?;
    let written = match cli.command {
        Command::Collect => cmd_collect(&cfg),
        Command::Estimate => cmd_estimate(&cfg),
        Command::Validate => cmd_validate(&cfg),
        Command::Calibrate => cmd_calibrate(&cfg),
        Command::Predict => cmd_predict(&cfg),
        Command::All => cmd_all(&cfg),
    }?;
    for path in written {
        log::info!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.report());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
