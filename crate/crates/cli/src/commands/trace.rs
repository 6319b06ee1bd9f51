use std::time::Instant;

use anyhow::{Context, Result};
use rdrot::datagen::gaussian_problem;
use rdrot::solver::TraceAnalysis;
use rdrot::{solve, Problem};

use super::{build_reg, load_problem, num, parse_size, solver_options, trace_csv, RunContext};
use crate::manifest::manifest_path;
use crate::{io, Outcome, TraceArgs};

pub fn run(ctx: &RunContext, args: TraceArgs) -> Result<Outcome> {
    let started = Instant::now();
    let mut manifest = ctx.manifest();
    let problem: Problem = match &args.gaussian {
        Some(size) => {
            let (m, n) = parse_size(size, "--gaussian")?;
            manifest.seed = Some(args.seed);
            manifest.option("gaussian", size.as_str());
            gaussian_problem(m, n, args.seed)?.0
        }
        None => load_problem(&args.input, &mut manifest)?.0,
    };
    let (m, n) = problem.dim();
    let reg = build_reg(&args.reg, "quad:alpha=1", m, n, &mut manifest)?;
    let mut options = solver_options(ctx, &args.solver, 1e-10, 500_000, &mut manifest)?;
    options.record_trace = true;
    let report = solve(&problem, &reg, &options).context("solver failed")?;

    io::write_file(&args.out, trace_csv(&report.trace, !ctx.deterministic).as_bytes())?;
    manifest.outputs.push(args.out.clone());
    println!(
        "termination={} iterations={} r_primal={:e}",
        report.termination.as_str(),
        report.iterations,
        report.r_primal
    );
    match TraceAnalysis::from_trace(&report.trace) {
        Some(a) => {
            println!(
                "support stable from iteration {} of {}: slope={:e} r_squared={:.4} median_ratio={:.6}",
                a.support_stable_from, a.last_iter, a.slope, a.r_squared, a.median_ratio
            );
            manifest.result("support_stable_from", a.support_stable_from);
            manifest.result("slope", num(a.slope));
            manifest.result("r_squared", num(a.r_squared));
            manifest.result("median_ratio", num(a.median_ratio));
        }
        None => println!("trace too short to analyze"),
    }
    manifest.result("iterations", report.iterations);
    manifest.termination = Some(report.termination.as_str().into());
    manifest.wall_clock_ms = ctx.elapsed_ms(started);
    manifest.write(&manifest_path(&args.out), ctx.deterministic)?;
    Ok(if report.converged() { Outcome::Done } else { Outcome::NotConverged })
}
