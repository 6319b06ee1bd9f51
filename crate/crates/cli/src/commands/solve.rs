use std::time::Instant;

use anyhow::{bail, Context, Result};
use rdrot::duality::duality_gap;
use rdrot::sinkhorn::{sinkhorn, SinkhornOptions};
use rdrot::{solve, RegularizerKind, SolveReport};

use super::{build_reg, load_problem, num, solver_options, trace_csv, RunContext};
use crate::manifest::manifest_path;
use crate::{io, Outcome, SolveArgs, SolverKind};

pub fn run(ctx: &RunContext, args: SolveArgs) -> Result<Outcome> {
    let started = Instant::now();
    let mut manifest = ctx.manifest();
    let (problem, _) = load_problem(&args.input, &mut manifest)?;
    let (m, n) = problem.dim();
    let reg = build_reg(&args.reg, "none", m, n, &mut manifest)?;
    let mut options = solver_options(ctx, &args.solver, 1e-4, 100_000, &mut manifest)?;
    options.record_trace = args.trace.is_some();

    let report: SolveReport = match args.method {
        SolverKind::Rdrot => {
            manifest.option("solver", "rdrot");
            solve(&problem, &reg, &options).context("solver failed")?
        }
        SolverKind::Sinkhorn => {
            if reg != RegularizerKind::Zero {
                bail!("--reg cannot be combined with --solver sinkhorn");
            }
            if !(args.eps > 0.0 && args.eps.is_finite()) {
                bail!("--eps must be positive");
            }
            manifest.option("solver", "sinkhorn");
            manifest.option("eps", args.eps);
            manifest.option("log_domain", args.log_domain);
            let sk = SinkhornOptions {
                epsilon: args.eps,
                max_iter: options.max_iter,
                tol: options.tol_primal,
                check_every: options.check_every,
                log_domain: args.log_domain,
                record_trace: options.record_trace,
            };
            sinkhorn(&problem, &sk).context("--solver sinkhorn")?
        }
    };
    manifest.option("rho", num(report.rho));

    io::write_matrix(&args.out, report.plan.entries())?;
    manifest.outputs.push(args.out.clone());
    if let Some(path) = &args.trace {
        io::write_file(path, trace_csv(&report.trace, !ctx.deterministic).as_bytes())?;
        manifest.outputs.push(path.clone());
    }

    let (ep, eq) = report.plan.marginal_errors(problem.p().view(), problem.q().view());
    manifest.result("iterations", report.iterations);
    manifest.result("objective", num(report.objective));
    manifest.result("r_primal", num(report.r_primal));
    manifest.result("marginal_error", num(ep.max(eq)));
    manifest.result("support", report.plan.support_size());
    let mut line = format!(
        "termination={} iterations={} objective={:e} r_primal={:e} support={}",
        report.termination.as_str(),
        report.iterations,
        report.objective,
        report.r_primal,
        report.plan.support_size()
    );
    if let Some(state) = &report.state {
        let cert = duality_gap(&problem, &reg, state, report.rho);
        manifest.result("gap", num(cert.gap));
        manifest.result("dual_residual", num(cert.dual_residual));
        line.push_str(&format!(" gap={:e}", cert.gap));
    }
    println!("{line}");

    manifest.termination = Some(report.termination.as_str().into());
    manifest.wall_clock_ms = ctx.elapsed_ms(started);
    manifest.write(&manifest_path(&args.out), ctx.deterministic)?;
    Ok(if report.converged() { Outcome::Done } else { Outcome::NotConverged })
}
