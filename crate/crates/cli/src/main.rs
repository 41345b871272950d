//! `trajkit` batch front end.
//!
//! Subcommands: `simulate`, `cluster`, `sil`, `rand`, `hclust`, `compare`.
//! Exit status is 0 on success, 1 on a usage error and 2 when loading data
//! or computing fails.

mod commands;
mod common;
mod plot;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use common::UsageError;

#[derive(Debug, Parser)]
#[command(name = "trajkit", version, about = "Cluster longitudinal trajectories with spline centers")]
struct Cli {
    /// Worker threads. Defaults to min(K, available cores).
    #[arg(long, global = true, env = "TRAJKIT_CORES")]
    cores: Option<usize>,

    /// Print progress to stderr.
    #[arg(long, short, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic cohort CSV.
    Simulate(commands::simulate::Args),
    /// Run k-means over spline centers.
    Cluster(commands::cluster::Args),
    /// Silhouettes of one or more clusterings.
    Sil(commands::sil::Args),
    /// Adjusted Rand indices between replicate runs.
    Rand(commands::rand::Args),
    /// Hierarchical clustering of the centers of a large-k run.
    Hclust(commands::hclust::Args),
    /// Align and compare two runs.
    Compare(commands::compare::Args),
}

impl Command {
    /// Upper bound on useful parallelism for the default core count.
    fn natural_width(&self) -> usize {
        match self {
            Command::Simulate(_) | Command::Compare(_) => usize::MAX,
            Command::Cluster(a) => a.k,
            Command::Sil(a) => a
                .k_list
                .as_ref()
                .and_then(|ks| ks.iter().copied().max())
                .unwrap_or(usize::MAX),
            Command::Rand(a) => a.k_list.len() * a.replicates,
            Command::Hclust(a) => a.k,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };

    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    let cores = cli
        .cores
        .unwrap_or_else(|| cli.command.natural_width().min(available))
        .max(1);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cores).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start {cores} worker threads: {e}");
            return ExitCode::from(2);
        }
    };
    if cli.verbose {
        eprintln!("using {cores} worker thread(s)");
    }

    let verbose = cli.verbose;
    let result = pool.install(|| match cli.command {
        Command::Simulate(a) => commands::simulate::run(a, verbose),
        Command::Cluster(a) => commands::cluster::run(a, verbose),
        Command::Sil(a) => commands::sil::run(a, verbose),
        Command::Rand(a) => commands::rand::run(a, verbose),
        Command::Hclust(a) => commands::hclust::run(a, verbose),
        Command::Compare(a) => commands::compare::run(a, verbose),
    });

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
