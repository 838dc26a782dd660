//! `ecomix`: ingest, train, discover, progression and serve.
//!
//! Exit codes: 0 success, 1 environment or configuration problem, 2 invalid
//! input data.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ecomix_core::discovery::{
    AlphaMode, ArchetypeConfig, BandPlan, DEFAULT_CANDIDATES, DEFAULT_PROGRESSION_SAMPLES,
};
use ecomix_core::pipeline::{self, DEFAULT_SEED, DEFAULT_TEST_FRACTION};
use ecomix_core::Error;
use ecomix_service::{AppState, ServiceConfig, DEFAULT_GENERATE_CAP};

#[derive(Parser)]
#[command(name = "ecomix", version, about = "Generative design of low-impact concrete mixes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Label the UCI concrete data with impact factors and split it.
    Ingest {
        #[arg(long)]
        uci: PathBuf,
        /// Factor table JSON (kg-basis GWP/AP/CBW per constituent).
        #[arg(long)]
        factors: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_TEST_FRACTION)]
        test_fraction: f64,
    },
    /// Train the generator and the property predictors.
    Train {
        /// Output directory of `ingest`.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Epochs for every model (default 500).
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        kl_weight: f64,
    },
    /// Generate candidates and write reduction, spectrum and hull reports.
    Discover {
        /// Output directory of `train`.
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Candidates per age bucket.
        #[arg(long, default_value_t = DEFAULT_CANDIDATES)]
        n: usize,
        /// Bands as BUCKET:CENTER[/HALF],...;... (default: the 13 standard bands).
        #[arg(long)]
        bands: Option<String>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Archetypes per hull.
        #[arg(long, default_value_t = 8)]
        archetypes: usize,
        /// Worker threads for generation.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Strength-conditioned generation across each bucket's strength range.
    Progression {
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_PROGRESSION_SAMPLES)]
        n: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Evenly spaced interpolation weights including both endpoints.
        #[arg(long)]
        grid: bool,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        models: PathBuf,
        /// Directory with discover/progression outputs (default: --models).
        #[arg(long)]
        artifacts: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value_t = DEFAULT_GENERATE_CAP)]
        generate_cap: u64,
    },
}

fn run(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Ingest {
            uci,
            factors,
            out,
            seed,
            test_fraction,
        } => {
            let meta = pipeline::ingest(&pipeline::IngestOptions {
                uci,
                factors,
                out,
                seed,
                test_fraction,
            })?;
            println!(
                "ingested {} records ({} train, {} test)",
                meta.n_records, meta.n_train, meta.n_test
            );
        }
        Command::Train {
            data,
            out,
            epochs,
            seed,
            kl_weight,
        } => {
            let s = pipeline::train(&pipeline::TrainOptions {
                data,
                out,
                epochs,
                seed,
                kl_weight,
            })?;
            if let (Some(first), Some(last)) = (s.trace.first(), s.trace.last()) {
                println!(
                    "cvae reconstruction mse {:.5} -> {:.5} over {} epochs",
                    first.reconstruction_mse,
                    last.reconstruction_mse,
                    s.trace.len()
                );
            }
            print!("{}\n{}", s.impact.to_csv(), s.strength.to_csv());
        }
        Command::Discover {
            models,
            out,
            n,
            bands,
            seed,
            archetypes,
            jobs,
        } => {
            let bands = match bands {
                Some(spec) => spec.parse()?,
                None => BandPlan::standard(),
            };
            if archetypes == 0 || jobs == Some(0) {
                return Err(Error::Config("--archetypes and --jobs must be at least 1".into()));
            }
            let report = pipeline::discover(&pipeline::DiscoverOptions {
                models,
                out,
                n,
                bands,
                seed,
                archetypes: ArchetypeConfig {
                    k: archetypes,
                    ..ArchetypeConfig::default()
                },
                jobs,
            })?;
            print!("{}", report.to_csv());
        }
        Command::Progression {
            models,
            out,
            n,
            seed,
            grid,
        } => {
            let reports = pipeline::progression(&pipeline::ProgressionOptions {
                models,
                out,
                n,
                seed,
                mode: if grid { AlphaMode::Grid } else { AlphaMode::Random },
            })?;
            println!("bucket,rmse_mpa");
            for r in reports {
                println!("{},{}", r.bucket, r.rmse);
            }
        }
        Command::Serve {
            models,
            artifacts,
            host,
            port,
            generate_cap,
        } => serve(models, artifacts, host, port, generate_cap)?,
    }
    Ok(())
}

fn serve(
    models: PathBuf,
    artifacts: Option<PathBuf>,
    host: String,
    port: u16,
    generate_cap: u64,
) -> Result<(), Error> {
    let mut config = ServiceConfig::new(models);
    if let Some(a) = artifacts {
        config.artifacts_dir = a;
    }
    config.generate_cap = generate_cap;
    // models are validated before anything is bound
    let state = AppState::new(config).map_err(|e| Error::Config(e.to_string()))?;
    let status = if state.snapshot().loaded.is_some() { "ok" } else { "degraded" };
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind((host.as_str(), port)).await?;
        println!("listening on {} ({status})", listener.local_addr()?);
        ecomix_service::serve(listener, state, shutdown_signal()).await?;
        Ok(())
    })
}

async fn shutdown_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        match signal(SignalKind::terminate()) {
            Ok(mut term) => {
                tokio::select! {
                    _ = term.recv() => {}
                    _ = tokio::signal::ctrl_c() => {}
                }
            }
            Err(_) => {
                let _ = tokio::signal::ctrl_c().await;
            }
        }
    }
    #[cfg(not(unix))]
    {
        let _ = tokio::signal::ctrl_c().await;
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_data_error() { 2 } else { 1 })
        }
    }
}
