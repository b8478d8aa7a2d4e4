//! `sparsedict`: generate synthetic dictionary-learning instances and run the
//! clustering based recovery pipeline stage by stage or end to end.

mod commands;
mod config_args;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config_args::ConfigArgs;

/// Environment variable capping worker threads; `--workers` wins over it.
pub const WORKERS_ENV: &str = "DLEARN_WORKERS";

#[derive(Parser, Debug)]
#[command(
    name = "sparsedict",
    version,
    about = "Dictionary learning by overlapping clustering"
)]
struct Cli {
    /// Maximum worker threads.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Draw a dictionary and samples; write them to `--out_dir`.
    Gen {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Build the connection graph of a sample file.
    Graph {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        samples: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cluster a connection graph.
    Cluster {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Ground-truth codes to score against.
        #[arg(long)]
        codes: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate dictionary columns from a clustering.
    Recover {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        samples: Option<PathBuf>,
        #[arg(long)]
        clusters: Option<PathBuf>,
        #[arg(long)]
        codes: Option<PathBuf>,
        /// Planted dictionary, for error reporting.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Refine an estimate with fresh sample batches.
    Refine {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Starting dictionary.
        #[arg(long)]
        init: Option<PathBuf>,
        /// Sample file consumed batch by batch. Without it batches are drawn
        /// from the planted dictionary.
        #[arg(long)]
        pool: Option<PathBuf>,
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every stage up to `--stage` and write a JSON report.
    Pipeline {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Run the pipeline once per value of one axis and emit CSV.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// One of k, p, sigma, tau, T, ell.
        #[arg(long)]
        axis: String,
        /// Comma-separated values; may be empty.
        #[arg(long, default_value = "", allow_hyphen_values = true)]
        values: String,
        /// CSV destination; standard output when absent.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Align estimates to a reference and score a clustering.
    Eval {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long = "estimate")]
        estimates: Vec<PathBuf>,
        #[arg(long)]
        clusters: Option<PathBuf>,
        #[arg(long)]
        codes: Option<PathBuf>,
    },
}

fn worker_cap(flag: Option<usize>) -> Option<usize> {
    flag.or_else(|| std::env::var(WORKERS_ENV).ok()?.trim().parse().ok())
        .filter(|&w| w > 0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let workers = worker_cap(cli.workers);
    if let Some(w) = workers {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global();
    }
    let result = match cli.command {
        Cmd::Gen { cfg } => commands::gen(&cfg),
        Cmd::Graph { cfg, samples, out } => commands::graph(&cfg, samples, out),
        Cmd::Cluster {
            cfg,
            graph,
            codes,
            out,
        } => commands::cluster(&cfg, graph, codes, out),
        Cmd::Recover {
            cfg,
            samples,
            clusters,
            codes,
            reference,
        } => commands::recover(&cfg, samples, clusters, codes, reference),
        Cmd::Refine {
            cfg,
            init,
            pool,
            reference,
            out,
        } => commands::refine(&cfg, init, pool, reference, out),
        Cmd::Pipeline { cfg } => commands::pipeline(&cfg),
        Cmd::Sweep {
            cfg,
            axis,
            values,
            csv,
        } => commands::sweep(&cfg, &axis, &values, csv, workers),
        Cmd::Eval {
            cfg,
            reference,
            estimates,
            clusters,
            codes,
        } => commands::eval(&cfg, reference, estimates, clusters, codes),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
