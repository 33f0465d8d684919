mod commands;
mod curves;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qkd_ratelab::oneway::{Direction, Estimation};
use qkd_ratelab::tomography::EstimationMode;
use qkd_ratelab::{Basis, Protocol};

use crate::curves::Functions;

#[derive(Parser)]
#[command(
    name = "qkd-ratelab",
    version,
    about = "Key rates, channel estimation and postprocessing for BB84 and six-state QKD"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Asymptotic key rate of one channel, as JSON.
    Rate(RateArgs),
    /// Rates over a one-parameter channel family, as CSV.
    Sweep(SweepArgs),
    /// Curve set of a built-in figure, as CSV.
    Figure(FigureArgs),
    /// Maximum-likelihood channel estimate from samples, as JSON.
    Estimate(EstimateArgs),
    /// Sampling, estimation and finite-key length end to end, as JSON.
    Simulate(SimulateArgs),
    /// Executable checks of privacy amplification and reconciliation.
    #[command(subcommand)]
    Audit(AuditCommand),
}

#[derive(Args)]
struct RateArgs {
    /// Inline channel (`amplitude_damping:0.2`), `@file.json` or `raw:@file.json`.
    #[arg(long)]
    channel: String,
    #[arg(long, default_value = "bb84")]
    protocol: Protocol,
    #[arg(long, default_value = "direct")]
    direction: Direction,
    #[arg(long, default_value = "proposed")]
    estimation: Estimation,
    /// Key basis.
    #[arg(long, default_value = "z")]
    basis: Basis,
    /// Flip probability before reconciliation: `none`, `optimize` or a value in [0, 1/2].
    #[arg(long, default_value = "none")]
    preprocessing: String,
    /// Two-way rate instead of one-way.
    #[arg(long)]
    twoway: bool,
    /// Two-way block functions: `ad`, `bob-keeps`, `optimize` or a table such as `0110/1111`.
    #[arg(long, default_value = "ad")]
    functions: Functions,
}

#[derive(Args)]
struct SweepArgs {
    /// Inline channel with one `{}` placeholder, e.g. `depolarizing:{}`.
    #[arg(long)]
    channel: String,
    #[arg(long)]
    start: f64,
    #[arg(long)]
    stop: f64,
    #[arg(long)]
    steps: usize,
    /// Curve such as `bb84/reverse`, `sixstate/conventional/noisy` or `bb84/twoway/chi=optimize`; repeatable.
    #[arg(long = "curve", required = true)]
    curves: Vec<String>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct FigureArgs {
    /// One of amp-damping-z, amp-damping-x, depolarizing-sixstate, depolarizing-bb84,
    /// quarter-rotated-bb84, quarter-rotated-sixstate, amp-damping-twoway.
    name: String,
    #[arg(long, default_value_t = 200)]
    points: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    /// Sample counts CSV.
    #[arg(long, conflicts_with = "channel")]
    samples: Option<PathBuf>,
    /// Channel to draw samples from instead of reading them.
    #[arg(long, required_unless_present = "samples")]
    channel: Option<String>,
    #[arg(long, default_value = "bb84")]
    protocol: Protocol,
    /// Number of samples to draw.
    #[arg(long, default_value_t = 100_000)]
    m: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the drawn samples as CSV.
    #[arg(long)]
    write_samples: Option<PathBuf>,
    /// Estimation mode; defaults to full-sixstate or bb84-omega by protocol.
    #[arg(long)]
    mode: Option<EstimationMode>,
    /// Probe radius of the continuity estimate.
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    channel: String,
    #[arg(long, default_value = "bb84")]
    protocol: Protocol,
    /// Samples used for estimation.
    #[arg(long, default_value_t = 100_000)]
    m: u64,
    /// Key-generation length (blocks for the two-way procedure).
    #[arg(long, default_value_t = 1_000_000)]
    n: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    eps: f64,
    #[arg(long, default_value_t = 1e-9)]
    delta: f64,
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    /// Syndrome rate added on top of the estimated conditional entropy.
    #[arg(long, default_value_t = 0.05)]
    ir_margin: f64,
    #[arg(long)]
    twoway: bool,
    /// Two-way block functions: `ad`, `bob-keeps` or a table such as `0110/1111`.
    #[arg(long, default_value = "ad")]
    functions: String,
    /// Monte Carlo trials of reconciliation at `--ir-block`; 0 skips the check.
    #[arg(long, default_value_t = 0)]
    ir_trials: usize,
    #[arg(long, default_value_t = 16)]
    ir_block: usize,
}

#[derive(Subcommand)]
enum AuditCommand {
    /// Largest collision probability of the Toeplitz family.
    Toeplitz {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        l: usize,
    },
    /// Exact distance from uniform of the hashed key against the leftover-hash bound.
    Secrecy {
        /// Quantum Eve: copies of the key state of this channel.
        #[arg(long, required_unless_present = "state")]
        channel: Option<String>,
        #[arg(long, default_value_t = 1)]
        copies: usize,
        #[arg(long, default_value = "z")]
        basis: Basis,
        /// Classical Eve: JSON `{"n": .., "eSize": .., "p": [..]}` with `p` indexed `x·eSize + e`.
        #[arg(long, conflicts_with = "channel")]
        state: Option<PathBuf>,
        #[arg(long)]
        l: usize,
    },
    /// One-way reconciliation error over a binary symmetric source.
    Ir {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        q: f64,
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Two-way reconciliation success on pairs drawn from a channel.
    IrTwoWay {
        #[arg(long)]
        channel: String,
        #[arg(long, default_value = "ad")]
        functions: String,
        /// Blocks per run.
        #[arg(long)]
        n: usize,
        /// Syndrome lengths `k1,kA2,kB2`.
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<usize>,
        #[arg(long, default_value_t = 300)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("QKD_RATELAB_THREADS") {
        let n: usize = v.parse().map_err(|_| anyhow::anyhow!("QKD_RATELAB_THREADS must be a positive integer"))?;
        if n == 0 {
            anyhow::bail!("QKD_RATELAB_THREADS must be a positive integer");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    init_threads()?;
    match cli.command {
        Command::Rate(a) => commands::rate(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Figure(a) => commands::figure(a),
        Command::Estimate(a) => commands::estimate(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Audit(a) => commands::audit(a),
    }
}

/// 3 for exhausted budgets, 2 for every other failure.
fn exit_code(e: &anyhow::Error) -> u8 {
    let budget = e
        .chain()
        .any(|c| matches!(c.downcast_ref::<qkd_ratelab::Error>(), Some(qkd_ratelab::Error::BudgetExceeded(_))));
    if budget {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
