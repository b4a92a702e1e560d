//! Command line front end: ingest -> simulate -> renumber -> summarize ->
//! diagnose -> plot, driven by a single TOML config.

mod config;
mod pipeline;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::RunConfig;
use districter_core::elections::ElectionSet;
use districter_core::export;

#[derive(Parser)]
#[command(name = "districter", version, about = "Redistricting plan ensembles by sequential Monte Carlo")]
struct Cli {
    /// Worker threads for sampling and statistics (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline: sample plans, renumber against the
    /// reference, compute statistics and diagnostics, write all artifacts.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Chain-count override.
        #[arg(long)]
        chains: Option<usize>,
    },
    /// Recompute the stats file from stored plans.
    Summarize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-verify stored plans and the convergence gate; exit nonzero on
    /// any failure.
    Diagnose {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also fail single-chain runs (no R-hat is computable).
        #[arg(long)]
        strict: bool,
    },
    /// Render a figure from a stats file.
    Plot {
        /// Stats file (defaults to <output dir>/stats.csv of --config).
        #[arg(long)]
        stats: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        kind: plot::PlotKind,
        #[arg(long)]
        column: String,
        /// Output SVG path.
        #[arg(long)]
        out: PathBuf,
        /// Histogram bin count.
        #[arg(long, default_value_t = 30)]
        bins: usize,
    },
    /// Load and validate the map, then print derived quantities.
    ValidateMap {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    #[cfg(feature = "parallel")]
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring thread pool")?;
    }
    #[cfg(not(feature = "parallel"))]
    if let Some(threads) = cli.threads {
        if threads > 1 {
            eprintln!("note: built without the parallel feature; --threads ignored");
        }
    }

    match cli.command {
        Command::Simulate { config, out, seed, chains } => {
            let config = RunConfig::load(&config)?;
            let report = pipeline::simulate(&config, out.as_deref(), seed, chains)?;
            print!("{}", report.text_summary());
            let dir = out.unwrap_or(config.output.dir);
            println!("artifacts written to {}", dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Summarize { config, out } => {
            let config = RunConfig::load(&config)?;
            let stats = pipeline::summarize(&config, out.as_deref())?;
            println!("{} rows summarized", stats.rows.len());
            Ok(ExitCode::SUCCESS)
        }
        Command::Diagnose { config, out, strict } => {
            let config = RunConfig::load(&config)?;
            let outcome = pipeline::diagnose(&config, out.as_deref(), strict)?;
            print!("{}", outcome.report.text_summary());
            for draw in &outcome.violations {
                println!("hard-constraint violation in draw {draw}");
            }
            if outcome.pass {
                println!("diagnose: PASS");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("diagnose: FAIL");
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Plot { stats, config, kind, column, out, bins } => {
            let stats_path = match (stats, &config) {
                (Some(p), _) => p,
                (None, Some(cfg)) => {
                    let config = RunConfig::load(cfg)?;
                    pipeline::RunPaths::new(&config.output.dir).stats()
                }
                (None, None) => anyhow::bail!("plot needs --stats or --config"),
            };
            let table = export::read_stats(&stats_path)
                .with_context(|| format!("reading stats {}", stats_path.display()))?;
            let svg = plot::render(&table, kind, &column, bins)?;
            export::atomic_write(&out, svg.as_bytes())?;
            println!("figure written to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::ValidateMap { config } => {
            let config = RunConfig::load(&config)?;
            let map = pipeline::load_configured_map(&config)?;
            println!("precincts: {}", map.node_count());
            println!("adjacency edges: {}", map.graph().edge_count());
            println!("districts: {}", map.ndists());
            println!("total population: {}", map.total_pop());
            println!("parity population: {:.3}", map.parity_population());
            println!(
                "absolute parity tolerance: {:.3} persons (pop_tol {}, ~{} people)",
                map.abs_pop_tolerance(),
                map.pop_tol(),
                map.abs_pop_tolerance().round()
            );
            println!("geometry complete: {}", map.geometry_complete());
            let elections = ElectionSet::discover(&map)?;
            let names: Vec<String> = elections.elections.iter().map(|e| e.name()).collect();
            println!("elections: {}", if names.is_empty() { "none".into() } else { names.join(", ") });
            if !map.ignored_columns().is_empty() {
                println!("ignored attribute columns: {}", map.ignored_columns().join(", "));
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
