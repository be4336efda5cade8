use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "nbhd", version, about = "Neighborhood-effect analysis pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage headlessly and write a result bundle.
    Run {
        /// Pipeline configuration (JSON).
        config: PathBuf,
        /// Output directory for the bundle.
        #[arg(short, long, default_value = "bundle")]
        out: PathBuf,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
    /// Write the synthetic reference dataset and a matching config.json.
    Synth {
        dir: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run { config, out } => match nbhd::service::run_pipeline(&config, &out) {
            Ok(summary) => {
                println!(
                    "bundle written to {} (group {}, bandwidth {}, {} clusters)",
                    summary.dir.display(),
                    summary.group,
                    summary.bandwidth,
                    summary.n_clusters
                );
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
        Command::Serve { addr } => {
            let rt = tokio::runtime::Runtime::new().expect("tokio runtime");
            match rt.block_on(nbhd::service::http::serve(addr)) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
        Command::Synth { dir } => match nbhd::service::write_reference_fixture(&dir) {
            Ok(path) => {
                println!("wrote {}", path.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
    }
}
