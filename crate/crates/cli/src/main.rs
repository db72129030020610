use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::{error, info};
use qrdv_cli::config::{parse_config, Settings, SEED_ENV};
use qrdv_cli::run_campaign;

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

/// Sweep quorum-based channel-hopping rendezvous schemes over primary-user
/// idle probability, user count and seeds.
#[derive(Debug, Parser)]
#[command(name = "qrdv", version)]
struct Cli {
    /// Flat JSON file whose keys mirror the flags below
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    let campaign = match parse_config(cli.config.as_deref(), env_seed.as_deref(), cli.settings) {
        Ok(c) => c,
        Err(e) => {
            error!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match run_campaign(&campaign) {
        Ok(result) => {
            info!(
                "wrote {} reports to {}",
                result.reports.len(),
                campaign.settings.out.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            error!("{e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
