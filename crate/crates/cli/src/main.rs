//! Command-line interface: config ingestion, subcommand dispatch, CSV/JSON
//! emission for boundaries, value surfaces, and validation reports.

mod config;
mod output;
mod run;

use clap::Parser;
use std::path::PathBuf;
use std::process::ExitCode;

/// Prices the Russian option with a last-exit-time horizon.
#[derive(Debug, Parser)]
#[command(name = "horizon", version, about)]
struct Cli {
    /// Subcommand: perpetual | boundary | value | surface | validate | figures
    #[arg(value_enum)]
    command: run::Command,

    /// Path to the JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory for CSV/JSON artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Override the Monte Carlo seed from the config.
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads (falls back to HORIZON_THREADS, then all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let threads = cli.threads.or_else(|| {
        std::env::var("HORIZON_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        // Ignore the error if a global pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }

    match run::run(cli.command, cli.config.as_deref(), &cli.out, cli.seed) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, kind) = match &err {
                run::CliError::Config(_) => (2u8, "config"),
                run::CliError::Domain(_) => (3u8, "domain"),
                run::CliError::Numerical(_) => (4u8, "numerical"),
                run::CliError::Io(_) => (4u8, "io"),
            };
            // Machine-readable error report on stderr.
            eprintln!(
                "{{\"error\":{},\"kind\":\"{}\",\"exit_code\":{}}}",
                serde_json::to_string(&err.to_string()).unwrap_or_else(|_| "\"?\"".into()),
                kind,
                code
            );
            ExitCode::from(code)
        }
    }
}
