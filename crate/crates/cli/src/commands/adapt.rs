use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use ndarray::Array1;
use rdrot::datagen::{barycentric_map, class_w2_score, half_squared_distances, PointCloud};
use rdrot::{solve, GroupPartition, Problem, RegularizerKind};

use super::{num, solver_options, RunContext};
use crate::manifest::manifest_path;
use crate::regspec::{RegData, RegSpec};
use crate::{io, AdaptArgs, Outcome};

fn read_cloud(path: &std::path::Path, flag: &str) -> Result<PointCloud> {
    PointCloud::from_csv(&io::read_text(path)?).with_context(|| format!("{flag} {}", path.display()))
}

pub fn run(ctx: &RunContext, args: AdaptArgs) -> Result<Outcome> {
    let started = Instant::now();
    let mut manifest = ctx.manifest();
    let source = read_cloud(&args.source, "--source")?;
    let target = read_cloud(&args.target, "--target")?;
    manifest.inputs.extend([args.source.clone(), args.target.clone()]);
    let labels = source
        .labels()
        .ok_or_else(|| anyhow!("--source: the source cloud needs a label column"))?
        .to_vec();
    if source.dim() != target.dim() {
        bail!("--target: dimension {} differs from the source's {}", target.dim(), source.dim());
    }
    let (m, n) = (source.len(), target.len());
    let problem = Problem::new(
        half_squared_distances(source.points(), target.points()),
        Array1::from_elem(m, 1.0 / m as f64),
        Array1::from_elem(n, 1.0 / n as f64),
    )?
    .normalize_cost()
    .0;

    let spec = RegSpec::parse(&args.reg)?;
    let data = match spec.name.as_str() {
        "gl" => RegData {
            groups: Some(GroupPartition::column_class_blocks(n, &labels)),
            ..RegData::default()
        },
        "none" | "quad" => RegData::default(),
        other => bail!("--reg: adapt supports none, quad and gl, not {other}"),
    };
    let reg: RegularizerKind = spec.build(m, n, data)?;
    manifest.option("reg", spec.to_string());
    let options = solver_options(ctx, &args.solver, 1e-4, 100_000, &mut manifest)?;
    let report = solve(&problem, &reg, &options).context("solver failed")?;

    let adapted = barycentric_map(report.plan.entries(), problem.p(), &target)?.with_labels(Some(labels))?;
    io::write_file(&args.out, adapted.to_csv().as_bytes())?;
    manifest.outputs.push(args.out.clone());

    let mut line = format!("termination={} iterations={}", report.termination.as_str(), report.iterations);
    if target.labels().is_some() {
        let score = class_w2_score(&adapted, &target)?;
        manifest.result("class_w2_score", num(score));
        line.push_str(&format!(" class_w2_score={score:e}"));
    }
    println!("{line}");
    manifest.result("iterations", report.iterations);
    manifest.termination = Some(report.termination.as_str().into());
    manifest.wall_clock_ms = ctx.elapsed_ms(started);
    manifest.write(&manifest_path(&args.out), ctx.deterministic)?;
    Ok(if report.converged() { Outcome::Done } else { Outcome::NotConverged })
}
