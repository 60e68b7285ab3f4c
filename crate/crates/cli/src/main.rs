use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use beamctl::export::{render_record, render_sweep, write_all, Format};
use beamctl::server::{serve, Store};
use beamctl::{run_experiment, run_sweep, ExperimentConfig};
use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(
    name = "beamctl",
    version,
    about = "Precise array response control: experiments and session service"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every method over the config's steps and export the results.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Sweep one step's desired level and export per-level D, J and gain.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the HTTP session API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Directory of per-session JSON files, replayed on start.
        #[arg(long)]
        persist: Option<PathBuf>,
    },
    /// Check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    match cli.command {
        Command::Run { config, out, format } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let record = run_experiment(&cfg)?;
            for p in write_all(&out, &render_record(&record, format)?)? {
                println!("{}", p.display());
            }
        }
        Command::Sweep { config, out } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let table = run_sweep(&cfg)?;
            for p in write_all(&out, &render_sweep(&table)?)? {
                println!("{}", p.display());
            }
        }
        Command::Serve { port, host, persist } => {
            let store = match persist {
                Some(dir) => Store::with_persistence(dir)?,
                None => Store::new(),
            };
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(SocketAddr::new(host, port), Arc::new(store)))?;
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let model = cfg.validate()?;
            println!(
                "ok: {} elements, {} methods, {} steps{}",
                model.len(),
                cfg.methods.len(),
                cfg.steps.len(),
                cfg.sweep
                    .map(|s| format!(", sweep of {} levels", s.points()))
                    .unwrap_or_default()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
