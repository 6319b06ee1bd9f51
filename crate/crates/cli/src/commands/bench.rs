use std::fmt::Write as _;
use std::time::Instant;

use anyhow::{bail, Result};
use rdrot::datagen::gaussian_problem;
use rdrot::sinkhorn::{sinkhorn, SinkhornOptions};
use rdrot::{solve, Error, RegularizerKind, SolveReport, SolverOptions};

use super::{parse_size, RunContext};
use crate::manifest::manifest_path;
use crate::{io, BenchArgs, Baseline, Outcome};

pub const BENCH_CSV_HEADER: &str = "method,m,n,reg,seed,iters,elapsed_ms,final_residual,objective,termination";

struct Row {
    method: &'static str,
    m: usize,
    n: usize,
    reg: String,
    seed: u64,
    outcome: std::result::Result<(SolveReport, f64), Error>,
}

impl Row {
    fn converged(&self) -> bool {
        self.outcome.as_ref().is_ok_and(|(r, _)| r.converged())
    }

    fn csv(&self, with_timing: bool) -> String {
        let prefix = format!("{},{},{},{},{}", self.method, self.m, self.n, self.reg, self.seed);
        match &self.outcome {
            Ok((report, ms)) => format!(
                "{prefix},{},{},{:e},{:e},{}",
                report.iterations,
                if with_timing { format!("{ms:.3}") } else { String::new() },
                report.r_primal,
                report.objective,
                report.termination.as_str()
            ),
            Err(Error::NumericalUnderflow) => format!("{prefix},,,,,underflow"),
            Err(_) => format!("{prefix},,,,,error"),
        }
    }
}

fn timed(f: impl FnOnce() -> rdrot::Result<SolveReport>) -> std::result::Result<(SolveReport, f64), Error> {
    let started = Instant::now();
    let report = f()?;
    Ok((report, started.elapsed().as_secs_f64() * 1e3))
}

pub fn run(ctx: &RunContext, args: BenchArgs) -> Result<Outcome> {
    let started = Instant::now();
    let sizes = args
        .sizes
        .iter()
        .map(|s| parse_size(s, "--sizes"))
        .collect::<Result<Vec<_>>>()?;
    if args.alphas.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
        bail!("--alphas must be positive");
    }
    if args.compare.is_some() && args.eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        bail!("--eps must be positive");
    }
    if !(args.tol > 0.0) || args.max_iter == 0 {
        bail!("--tol and --max-iter must be positive");
    }
    let options = SolverOptions {
        tol_primal: args.tol,
        max_iter: args.max_iter,
        deterministic: ctx.deterministic,
        ..SolverOptions::default()
    };

    let mut rows = Vec::new();
    for &(m, n) in &sizes {
        for seed in 0..args.seeds {
            let (problem, _, _) = gaussian_problem(m, n, seed)?;
            for &alpha in &args.alphas {
                let effective = if args.scale_by_mn { alpha * (m + n) as f64 } else { alpha };
                let reg = RegularizerKind::quadratic(effective)?;
                rows.push(Row {
                    method: "rdrot",
                    m,
                    n,
                    reg: format!("quad:alpha={alpha}"),
                    seed,
                    outcome: timed(|| solve(&problem, &reg, &options)),
                });
            }
            if args.compare == Some(Baseline::Sinkhorn) {
                for &eps in &args.eps {
                    let sk = SinkhornOptions {
                        epsilon: eps,
                        tol: args.tol,
                        max_iter: args.max_iter,
                        log_domain: args.log_domain,
                        ..SinkhornOptions::default()
                    };
                    rows.push(Row {
                        method: if args.log_domain { "sinkhorn-log" } else { "sinkhorn" },
                        m,
                        n,
                        reg: format!("eps={eps}"),
                        seed,
                        outcome: timed(|| sinkhorn(&problem, &sk)),
                    });
                }
            }
        }
    }

    let mut csv = format!("{BENCH_CSV_HEADER}\n");
    for row in &rows {
        writeln!(csv, "{}", row.csv(!ctx.deterministic))?;
    }
    io::write_file(&args.out, csv.as_bytes())?;

    let failed = rows.iter().filter(|r| !r.converged()).count();
    println!("{} runs, {} did not converge", rows.len(), failed);

    let mut manifest = ctx.manifest();
    manifest.option("sizes", args.sizes.clone());
    manifest.option("alphas", args.alphas.clone());
    manifest.option("seeds", args.seeds);
    manifest.option("compare", args.compare.map(|_| "sinkhorn"));
    manifest.option("eps", args.eps.clone());
    manifest.option("log_domain", args.log_domain);
    manifest.option("tol", args.tol);
    manifest.option("max_iter", args.max_iter);
    manifest.option("scale_by_mn", args.scale_by_mn);
    manifest.seed = Some(0);
    manifest.outputs.push(args.out.clone());
    manifest.result("runs", rows.len());
    manifest.result("not_converged", failed);
    manifest.termination = Some(if failed == 0 { "converged" } else { "partial" }.into());
    manifest.wall_clock_ms = ctx.elapsed_ms(started);
    manifest.write(&manifest_path(&args.out), ctx.deterministic)?;
    Ok(if failed == 0 { Outcome::Done } else { Outcome::NotConverged })
}
