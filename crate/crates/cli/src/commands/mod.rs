mod adapt;
mod bench;
mod generate;
mod replay;
mod solve;
mod trace;

use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use rdrot::{CostScale, GroupPartition, Init, Problem, RegularizerKind, SolverOptions, Stepsize, TraceRecord};
use serde_json::Value;

use crate::manifest::Manifest;
use crate::regspec::{RegData, RegSpec};
use crate::{io, Cli, Command, InitArg, InputArgs, Outcome, RegArgs, SolverArgs};

pub fn run(cli: Cli, argv: &[String]) -> Result<Outcome> {
    let ctx = RunContext {
        argv: argv.to_vec(),
        deterministic: cli.deterministic,
    };
    match cli.command {
        Command::Solve(args) => solve::run(&ctx, args),
        Command::Bench(args) => bench::run(&ctx, args),
        Command::Trace(args) => trace::run(&ctx, args),
        Command::Adapt(args) => adapt::run(&ctx, args),
        Command::Generate(args) => generate::run(&ctx, args),
        Command::Replay(args) => replay::run(args),
    }
}

/// Per-invocation settings shared by the commands.
pub struct RunContext {
    pub argv: Vec<String>,
    pub deterministic: bool,
}

impl RunContext {
    fn manifest(&self) -> Manifest {
        Manifest::new(&self.argv)
    }

    fn elapsed_ms(&self, started: std::time::Instant) -> Option<f64> {
        (!self.deterministic).then(|| started.elapsed().as_secs_f64() * 1e3)
    }
}

fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a PathBuf> {
    value.as_ref().ok_or_else(|| anyhow!("{flag} is required"))
}

/// Reads cost and marginals, optionally normalizing the cost.
fn load_problem(input: &InputArgs, manifest: &mut Manifest) -> Result<(Problem, CostScale)> {
    let cost_path = required(&input.cost, "--cost")?;
    let p_path = required(&input.p, "--p")?;
    let q_path = required(&input.q, "--q")?;
    let cost = io::read_matrix(cost_path).context("--cost")?;
    let p = io::read_vector(p_path).context("--p")?;
    let q = io::read_vector(q_path).context("--q")?;
    manifest.inputs.extend([cost_path.clone(), p_path.clone(), q_path.clone()]);
    let problem = Problem::new(cost, p, q).context("invalid problem")?;
    let (problem, scale) = if input.normalize {
        problem.normalize_cost()
    } else {
        (problem, CostScale::Scaled(1.0))
    };
    manifest.option("normalize", input.normalize);
    manifest.option("cost_scale", scale.factor());
    Ok((problem, scale))
}

fn build_reg(args: &RegArgs, default: &str, m: usize, n: usize, manifest: &mut Manifest) -> Result<RegularizerKind> {
    let spec = RegSpec::parse(args.reg.as_deref().unwrap_or(default))?;
    let mut data = RegData {
        scale_by_mn: args.scale_by_mn,
        ..RegData::default()
    };
    if let Some(path) = &args.groups {
        let text = io::read_text(path)?;
        data.groups = Some(GroupPartition::parse(&text, m, n).context("--groups")?);
        manifest.inputs.push(path.clone());
    }
    if let Some(path) = &args.weights {
        data.weights = Some(io::read_matrix(path).context("--weights")?);
        manifest.inputs.push(path.clone());
    }
    if let Some(path) = &args.forbidden {
        data.forbidden = Some(io::read_cells(path).context("--forbidden")?);
        manifest.inputs.push(path.clone());
    }
    let reg = spec.build(m, n, data)?;
    manifest.option("reg", spec.to_string());
    manifest.option("scale_by_mn", args.scale_by_mn);
    manifest.option("regularizer", reg.to_string());
    Ok(reg)
}

/// Solver options from flags; `tol` and `max_iter` fall back to the given defaults.
fn solver_options(
    ctx: &RunContext,
    args: &SolverArgs,
    tol: f64,
    max_iter: usize,
    manifest: &mut Manifest,
) -> Result<SolverOptions> {
    let options = SolverOptions {
        rho: args.rho.map_or(Stepsize::Auto, Stepsize::Fixed),
        max_iter: args.max_iter.unwrap_or(max_iter),
        tol_primal: args.tol.unwrap_or(tol),
        tol_gap: args.tol_gap,
        check_every: args.check_every,
        deterministic: ctx.deterministic,
        record_trace: false,
        init: match args.init {
            InitArg::Skip => Init::SkipAhead,
            InitArg::Product => Init::Product,
        },
        fused: args.fused,
    };
    for (flag, ok) in [
        ("--tol", options.tol_primal > 0.0),
        ("--tol-gap", options.tol_gap.is_none_or(|t| t > 0.0)),
        ("--max-iter", options.max_iter > 0),
        ("--rho", args.rho.is_none_or(|r| r > 0.0 && r.is_finite())),
        ("--check-every", options.check_every > 0),
    ] {
        if !ok {
            bail!("{flag} must be positive");
        }
    }
    manifest.option("tol", options.tol_primal);
    manifest.option("tol_gap", options.tol_gap);
    manifest.option("max_iter", options.max_iter);
    manifest.option("init", format!("{:?}", args.init).to_lowercase());
    manifest.option("check_every", options.check_every);
    manifest.option("fused", options.fused);
    Ok(options)
}

fn trace_csv(trace: &[TraceRecord], with_timing: bool) -> String {
    let mut out = String::from(rdrot::solver::trace::TRACE_CSV_HEADER);
    out.push('\n');
    for record in trace {
        out.push_str(&record.to_csv_row(with_timing));
        out.push('\n');
    }
    out
}

/// JSON number, or null for non-finite values.
fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

fn parse_size(text: &str, flag: &str) -> Result<(usize, usize)> {
    let parsed = text
        .split_once(['x', 'X'])
        .and_then(|(m, n)| Some((m.trim().parse().ok()?, n.trim().parse().ok()?)));
    match parsed {
        Some((m, n)) if m > 0 && n > 0 => Ok((m, n)),
        _ => bail!("{flag}: expected MxN with positive sizes, got {text:?}"),
    }
}
