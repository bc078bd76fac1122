//! Command-line front end wiring the pipeline together.
//!
//! Exit codes: 0 ok, 1 missing tooling, 2 bad config/args, 3 corrupt log.
//! Snippet-level failures (refusals, compile errors, crashes) are campaign
//! data and never fail the process.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sltgen_core::campaign::{
    run_campaign, run_evaluate, run_generate, run_replay, run_report, CampaignError,
};
use sltgen_core::config::CampaignConfig;

#[derive(Parser, Debug)]
#[command(
    name = "sltgen",
    about = "Generate C test programs with an LLM and optimize them for instructions per cycle",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Request completions once, extract the snippets and log them.
    Generate {
        /// Campaign config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Number of completions to request.
        #[arg(long)]
        count: u64,
    },
    /// Compile and score every .c file in a directory on the configured backend.
    Evaluate {
        /// Directory of C sources.
        dir: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the full hyperparameter-search campaign.
    Campaign {
        #[arg(long)]
        config: PathBuf,
    },
    /// Replay a campaign log and print pass@k statistics plus a JSON report.
    Report {
        /// Campaign directory or campaign.jsonl path.
        log: PathBuf,
        /// IPC threshold for the second pass definition.
        #[arg(long, default_value_t = 0.5)]
        ipc_threshold: f64,
    },
    /// Replay a campaign log and print the reconstructed trial history.
    Replay { log: PathBuf },
}

fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CampaignError> {
    match cli.command {
        Command::Generate { config, count } => {
            let config = CampaignConfig::load(&config)?;
            run_generate(&config, count, out)?;
        }
        Command::Evaluate { dir, config } => {
            let config = CampaignConfig::load(&config)?;
            run_evaluate(&config, &dir, out)?;
        }
        Command::Campaign { config } => {
            let config = CampaignConfig::load(&config)?;
            let summary = run_campaign(&config, out)?;
            writeln!(
                out,
                "log: {}",
                summary.log_dir.join("campaign.jsonl").display()
            )
            .ok();
        }
        Command::Report { log, ipc_threshold } => {
            run_report(&log, ipc_threshold, out)?;
        }
        Command::Replay { log } => {
            run_replay(&log, out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    match run(cli, &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
