//! `dhkpr`: heat kernel pagerank estimation, sweeps and local clustering on
//! a simulated CONGEST network. Every command prints one text report.
//!
//! The binary is a thin wrapper over [`run`], so tests can drive the exact
//! same code path in-process.

mod commands;
mod source;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use dhkpr::congest::{CongestionMode, DEFAULT_BETA, DEFAULT_ROUND_CAP, ROUND_CAP_ENV};

#[derive(Debug, Parser)]
#[command(
    name = "dhkpr",
    version,
    about = "Distributed heat kernel pagerank and local clustering on a simulated CONGEST network"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Simulator settings shared by every distributed command.
#[derive(Debug, Clone, Args)]
struct Net {
    /// Congestion accounting: `paper` charges one round per logical round,
    /// `strict` serializes overloaded edges.
    #[arg(long, default_value = "paper")]
    mode: CongestionMode,
    /// Bandwidth is ⌈beta·log₂ n⌉ bits per edge per round.
    #[arg(long, default_value_t = DEFAULT_BETA)]
    beta: f64,
    /// Abort a protocol after this many rounds.
    #[arg(long, env = ROUND_CAP_ENV, default_value_t = DEFAULT_ROUND_CAP)]
    round_cap: u64,
    /// Write a per-round `round from to bits` trace to this file.
    #[arg(long, value_name = "PATH")]
    trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct Walk {
    #[arg(long, default_value_t = 0)]
    seed_node: usize,
    /// Error bound ε.
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Step-cap constant c ≥ 1.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
}

#[derive(Debug, Clone, Args)]
struct ClusterArgs {
    #[command(flatten)]
    walk: Walk,
    /// Target cluster size σ [default: ⌈n/2⌉].
    #[arg(long)]
    sigma: Option<u64>,
    /// Target cluster volume ς [default: m].
    #[arg(long)]
    varsigma: Option<u64>,
    /// Acceptance constant: Φ(S) ≤ c2·√φ.
    #[arg(long, default_value_t = dhkpr::cluster::DEFAULT_C2)]
    c2: f64,
    /// Diffusion time to use instead of ln(2√ς/ε)/φ.
    #[arg(long)]
    t_override: Option<f64>,
    /// Sweep with the hop-by-hop chain, stopping at the size/volume caps.
    #[arg(long)]
    chain: bool,
    /// Run seed.
    #[arg(long, required = true)]
    seed: u64,
    #[command(flatten)]
    net: Net,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the heat kernel pagerank vector with the token protocol.
    Hkpr {
        #[arg(help = source::GENERATOR_HELP)]
        graph: String,
        #[command(flatten)]
        walk: Walk,
        /// Diffusion time t.
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Run seed.
        #[arg(long, required = true)]
        seed: u64,
        #[command(flatten)]
        net: Net,
    },
    /// Exact heat kernel pagerank from the truncated series.
    HkprExact {
        #[arg(help = source::GENERATOR_HELP)]
        graph: String,
        #[arg(long, default_value_t = 0)]
        seed_node: usize,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Truncation tolerance (Poisson tail mass).
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Estimate, then sweep the estimate.
    Sweep {
        #[arg(help = source::GENERATOR_HELP)]
        graph: String,
        #[command(flatten)]
        walk: Walk,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Chain sweep with early stopping; needs --sigma or --varsigma.
        #[arg(long)]
        chain: bool,
        #[arg(long)]
        sigma: Option<u64>,
        #[arg(long)]
        varsigma: Option<u64>,
        #[arg(long, required = true)]
        seed: u64,
        #[command(flatten)]
        net: Net,
    },
    /// Local cluster for a known target conductance φ.
    Cluster {
        #[arg(help = source::GENERATOR_HELP)]
        graph: String,
        /// Target Cheeger ratio φ.
        #[arg(long, default_value_t = 0.5)]
        phi: f64,
        #[command(flatten)]
        args: ClusterArgs,
    },
    /// Local cluster, halving φ from 1/2 until the result is accepted.
    ClusterAuto {
        #[arg(help = source::GENERATOR_HELP)]
        graph: String,
        #[command(flatten)]
        args: ClusterArgs,
    },
    /// Sparse cut: automatic local clusters from sampled seeds, best kept.
    Sparsecut {
        #[arg(help = source::GENERATOR_HELP)]
        graph: String,
        /// Seeds to sample [default: ⌈(n/σ)·ln n⌉].
        #[arg(long)]
        samples: Option<usize>,
        #[command(flatten)]
        args: ClusterArgs,
    },
    /// k-machine round estimates from CONGEST complexities.
    Kmachine {
        /// Graph for symbolic and measured complexities; omit with --messages.
        #[arg(help = source::GENERATOR_HELP)]
        graph: Option<String>,
        /// Machine counts.
        #[arg(long, value_delimiter = ',', default_value = "2,4,8,16,32,64")]
        k: Vec<u64>,
        #[command(flatten)]
        walk: Walk,
        /// Override the graph's maximum degree in the symbolic bounds.
        #[arg(long)]
        max_degree: Option<usize>,
        /// Direct measurement: total messages M.
        #[arg(long, requires_all = ["rounds", "max_node_messages"], conflicts_with = "graph")]
        messages: Option<f64>,
        /// Direct measurement: rounds T.
        #[arg(long, requires = "messages")]
        rounds: Option<f64>,
        /// Direct measurement: communication degree C.
        #[arg(long, requires = "messages")]
        max_node_messages: Option<f64>,
        /// Also measure a simulated estimation and local-cluster run.
        #[arg(long)]
        seed: Option<u64>,
        /// Diffusion time of the measured estimation run.
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Target conductance of the measured local-cluster run.
        #[arg(long, default_value_t = 0.5)]
        phi: f64,
        #[command(flatten)]
        net: Net,
    },
}

/// What one invocation wrote and how it exited.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: u8,
    pub stdout: String,
    pub stderr: String,
}

/// Runs the CLI on `argv`, program name first.
pub fn run<I, T>(argv: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let clap_failure = |e: clap::Error| {
        let text = e.render().to_string();
        let (stdout, stderr) = if e.use_stderr() {
            (String::new(), text)
        } else {
            (text, String::new())
        };
        Outcome {
            code: e.exit_code() as u8,
            stdout,
            stderr,
        }
    };
    let matches = match Cli::command().try_get_matches_from(&argv) {
        Ok(m) => m,
        Err(e) => return clap_failure(e),
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => return clap_failure(e),
    };
    let (name, sub) = matches.subcommand().expect("a subcommand is required");
    let echo = argv[1..]
        .iter()
        .map(|a| a.to_string_lossy())
        .collect::<Vec<_>>()
        .join(" ");
    match commands::run(cli.command, name, sub, &echo) {
        Ok(report) => Outcome {
            code: 0,
            stdout: report.to_string(),
            stderr: String::new(),
        },
        Err(e) => {
            let mut stderr = format!("error: {}\n", e.message);
            if e.code == 2 {
                let mut cmd = Cli::command();
                if let Some(sub) = cmd.find_subcommand_mut(name) {
                    stderr.push_str(&format!("\n{}\n", sub.render_usage()));
                }
            }
            Outcome {
                code: e.code,
                stdout: String::new(),
                stderr,
            }
        }
    }
}
