use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "hopflow", version, about = "Low-hop emulators, embeddings and min-cost flow")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Edge-list graph file.
    #[arg(long, global = true)]
    pub graph: Option<PathBuf>,
    /// Random seed; generated and reported when omitted.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Emulator parameter k (default 0.5 log2 n).
    #[arg(long, global = true)]
    pub k: Option<f64>,
    /// Accuracy for flow and path commands.
    #[arg(long = "eps", global = true, default_value_t = 0.1)]
    pub epsilon: f64,
    /// Decomposition parameter.
    #[arg(long, global = true, default_value_t = 0.5)]
    pub beta: f64,
    /// Embedding repetitions per scale (default 4 ceil(log2 n)).
    #[arg(long, global = true)]
    pub t_rep: Option<usize>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true, env = "HOPFLOW_THREADS", default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Emulator construction.
    #[command(subcommand)]
    Emulator(EmulatorCommand),
    /// Distance oracle queries.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Approximate distances from one source.
    Sssp { source: usize },
    /// l1 embedding of the vertices.
    Embed,
    /// Low-diameter decomposition.
    Ldd,
    /// Subemulator with ball size b.
    Subemulator {
        #[arg(long)]
        b: usize,
    },
    /// Approximate minimum-cost flow for a demand vector.
    Flow {
        /// JSON array with one demand per vertex.
        #[arg(long)]
        demand: PathBuf,
    },
    /// Approximate shortest s-t path.
    Stpath { s: usize, t: usize },
    /// Timings against Dijkstra, as CSV.
    Bench {
        /// Sources for the single-source comparison.
        #[arg(long, default_value_t = 8)]
        sources: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum EmulatorCommand {
    /// Build the emulator and report its shape.
    Build {
        /// Also save the emulator in edge-list form.
        #[arg(long)]
        save: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum OracleCommand {
    /// Approximate distance between u and v.
    Query { u: usize, v: usize },
}
