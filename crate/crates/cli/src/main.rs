//! `rdrot`: solve, benchmark and inspect regularized optimal transport problems.
//!
//! Exit codes: 0 on success, 1 on bad input or usage, 2 when a solver stops
//! without meeting its tolerance.

mod commands;
mod io;
mod manifest;
mod regspec;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "rdrot", version, about = "Regularized optimal transport by Douglas-Rachford splitting")]
pub struct Cli {
    /// Worker threads for the parallel kernels.
    #[arg(long, global = true, env = "OT_THREADS")]
    pub threads: Option<usize>,

    /// Fixed-order reductions and blank wall-clock fields, so that repeated
    /// runs give identical files on any thread count.
    #[arg(long, global = true)]
    pub deterministic: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one problem read from files.
    Solve(SolveArgs),
    /// Time the solvers on generated problems.
    Bench(BenchArgs),
    /// Record and analyze a convergence trace.
    Trace(TraceArgs),
    /// Map a labeled source cloud onto a target cloud.
    Adapt(AdaptArgs),
    /// Write a generated problem to a directory.
    Generate(GenerateArgs),
    /// Re-run the command recorded in a manifest and compare output digests.
    Replay(ReplayArgs),
}

/// Problem files.
#[derive(Debug, Args)]
pub struct InputArgs {
    /// Cost matrix (CSV or OTPB binary).
    #[arg(long)]
    pub cost: Option<PathBuf>,
    /// Source marginal.
    #[arg(long)]
    pub p: Option<PathBuf>,
    /// Target marginal.
    #[arg(long)]
    pub q: Option<PathBuf>,
    /// Divide the cost by its largest entry before solving.
    #[arg(long)]
    pub normalize: bool,
}

/// Regularizer selection.
#[derive(Debug, Args)]
pub struct RegArgs {
    /// Regularizer: none, quad:alpha=A, gl:lambda=L, wl1:w=W, forbid, hypent:beta=B.
    #[arg(long)]
    pub reg: Option<String>,
    /// Group file for gl.
    #[arg(long)]
    pub groups: Option<PathBuf>,
    /// Weight matrix for wl1.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Forbidden cells for forbid, one `i,j` per line.
    #[arg(long)]
    pub forbidden: Option<PathBuf>,
    /// Multiply the quadratic weight by m + n.
    #[arg(long)]
    pub scale_by_mn: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Skip,
    Product,
}

/// Splitting solver settings.
#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Primal residual tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Also require the duality gap and dual residual below this.
    #[arg(long)]
    pub tol_gap: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Stepsize; defaults to 2 / (m + n).
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long, value_enum, default_value_t = InitArg::Skip)]
    pub init: InitArg,
    /// Check the stopping rule every this many iterations.
    #[arg(long, default_value_t = 1)]
    pub check_every: usize,
    /// Read the cost only every second iteration.
    #[arg(long)]
    pub fused: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverKind {
    Rdrot,
    Sinkhorn,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub reg: RegArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long = "solver", value_enum, default_value_t = SolverKind::Rdrot)]
    pub method: SolverKind,
    /// Entropic weight for sinkhorn.
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    /// Run sinkhorn in the log domain.
    #[arg(long)]
    pub log_domain: bool,
    /// Plan output; `.bin` selects the binary format.
    #[arg(long)]
    pub out: PathBuf,
    /// Write the convergence trace here.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    Sinkhorn,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Problem sizes as MxN.
    #[arg(long, value_delimiter = ',', default_value = "200x300")]
    pub sizes: Vec<String>,
    /// Quadratic weights.
    #[arg(long, value_delimiter = ',', default_value = "5e-4,5e-3,5e-2,2e-1")]
    pub alphas: Vec<f64>,
    /// Number of seeds, starting from 0.
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    /// Baseline to run alongside.
    #[arg(long, value_enum)]
    pub compare: Option<Baseline>,
    /// Entropic weights for the comparison.
    #[arg(long, value_delimiter = ',', default_value = "1e-2,1e-1,1")]
    pub eps: Vec<f64>,
    #[arg(long)]
    pub log_domain: bool,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, default_value_t = 50_000)]
    pub max_iter: usize,
    /// Multiply each quadratic weight by m + n.
    #[arg(long)]
    pub scale_by_mn: bool,
    /// Results CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Generate a Gaussian problem of size MxN instead of reading files.
    #[arg(long, conflicts_with_all = ["cost", "p", "q"])]
    pub gaussian: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub reg: RegArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Trace CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AdaptArgs {
    /// Labeled source cloud.
    #[arg(long)]
    pub source: PathBuf,
    /// Target cloud; labels are used only for scoring.
    #[arg(long)]
    pub target: PathBuf,
    /// none, quad:alpha=A or gl:lambda=L.
    #[arg(long, default_value = "gl:lambda=1e-3")]
    pub reg: String,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Adapted source cloud.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenerateKind {
    Gaussian,
    Adapt,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(value_enum)]
    pub kind: GenerateKind,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of classes for adapt.
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    pub manifest: PathBuf,
}

/// Result of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    NotConverged,
}

fn configure_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = configure_threads(cli.threads).and_then(|()| commands::run(cli, &argv));
    match result {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
