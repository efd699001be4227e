//! `kramers`: indices, decoupling runs and edge diagnostics from a TOML
//! run configuration.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Fixture, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] kramers_core::Error),
    #[error("cannot write outputs: {0}")]
    Output(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(_) => 1,
            CliError::Output(_) => 3,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "kramers", version, about = "Z2 indices, symmetric Wold decoupling and edge diagnostics")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Replaces the model seed, the random fixture seed and the scan seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Replaces `output.dir`.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads for scans; the output does not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Bulk, edge and comparison indices.
    #[command(subcommand)]
    Index(IndexCommand),
    /// Symmetric decoupling of a (U, P, τ) pair.
    #[command(subcommand)]
    Wold(WoldCommand),
    /// Cylinder band structure and edge transport.
    #[command(subcommand)]
    Edge(EdgeCommand),
    /// Model matrices.
    #[command(subcommand)]
    Model(ModelCommand),
}

#[derive(Subcommand, Debug)]
enum IndexCommand {
    Bulk(CountingFlags),
    Edge(CountingFlags),
    /// Bulk against edge parity over the scan grid.
    Compare(CountingFlags),
}

#[derive(Args, Debug)]
struct CountingFlags {
    /// Comma-separated distances to +1, loosest first.
    #[arg(long, value_delimiter = ',')]
    tol_sweep: Option<Vec<f64>>,
    #[arg(long)]
    filter_radius: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum WoldCommand {
    Run {
        /// Pair file with blocks `U`, `P`, `tau`.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        cluster_tol: Option<f64>,
        /// Chain depth for an odd pair.
        #[arg(long)]
        depth: Option<usize>,
    },
}

#[derive(Subcommand, Debug)]
enum EdgeCommand {
    Spectrum,
    Transport,
}

#[derive(Subcommand, Debug)]
enum ModelCommand {
    Export,
}

impl CountingFlags {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(t) = &self.tol_sweep {
            cfg.tolerance.tol_sweep = t.clone();
        }
        if let Some(r) = self.filter_radius {
            cfg.tolerance.filter_radius = Some(r);
        }
    }
}

/// The configuration after every command-line override.
fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        if let Some(m) = cfg.model.as_mut() {
            m.seed = seed;
        }
        if let Fixture::Random { seed: s, .. } = &mut cfg.wold.fixture {
            *s = seed;
        }
        cfg.scan.seeds = vec![seed];
    }
    if let Some(dir) = &cli.out_dir {
        cfg.output.dir = dir.clone();
    }
    match &cli.command {
        Command::Index(IndexCommand::Bulk(f) | IndexCommand::Edge(f) | IndexCommand::Compare(f)) => f.apply(&mut cfg),
        Command::Wold(WoldCommand::Run {
            input,
            cluster_tol,
            depth,
        }) => {
            if input.is_some() {
                cfg.wold.input = input.clone();
            }
            if let Some(t) = cluster_tol {
                cfg.tolerance.cluster_tol = *t;
            }
            if depth.is_some() {
                cfg.wold.depth = *depth;
            }
        }
        _ => {}
    }
    if cli.workers == Some(0) {
        return Err(CliError::Config("--workers must be positive".into()));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let cfg = resolve(cli)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Config(e.to_string()))?;
    let outputs = pool.install(|| match &cli.command {
        Command::Index(IndexCommand::Bulk(_)) => commands::index_bulk(&cfg),
        Command::Index(IndexCommand::Edge(_)) => commands::index_edge(&cfg),
        Command::Index(IndexCommand::Compare(_)) => commands::index_compare(&cfg),
        Command::Wold(WoldCommand::Run { .. }) => commands::wold_run(&cfg),
        Command::Edge(EdgeCommand::Spectrum) => commands::edge_spectrum(&cfg),
        Command::Edge(EdgeCommand::Transport) => commands::edge_transport(&cfg),
        Command::Model(ModelCommand::Export) => commands::model_export(&cfg),
    })?;
    outputs.commit(&cfg.output.dir)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
