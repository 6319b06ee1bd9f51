use anyhow::{bail, Result};
use rdrot::datagen::{adaptation_problem, gaussian_problem};

use super::RunContext;
use crate::{io, GenerateArgs, GenerateKind, Outcome};

pub fn run(ctx: &RunContext, args: GenerateArgs) -> Result<Outcome> {
    if args.m == 0 || args.n == 0 {
        bail!("--m and --n must be at least 1");
    }
    let dir = &args.out_dir;
    let (problem, groups, source, target) = match args.kind {
        GenerateKind::Gaussian => {
            let (problem, source, target) = gaussian_problem(args.m, args.n, args.seed)?;
            (problem, None, source, target)
        }
        GenerateKind::Adapt => {
            if args.classes == 0 || args.m < args.classes || args.n < args.classes {
                bail!("--classes must be between 1 and min(--m, --n)");
            }
            let (problem, groups, source, target) = adaptation_problem(args.m, args.n, args.classes, args.seed)?;
            (problem, Some(groups), source, target)
        }
    };
    let mut manifest = ctx.manifest();
    let mut write = |name: &str, bytes: &[u8]| -> Result<()> {
        let path = dir.join(name);
        io::write_file(&path, bytes)?;
        manifest.outputs.push(path);
        Ok(())
    };
    write("cost.csv", io::matrix_to_csv(problem.cost()).as_bytes())?;
    write("p.csv", io::vector_to_csv(problem.p()).as_bytes())?;
    write("q.csv", io::vector_to_csv(problem.q()).as_bytes())?;
    write("source.csv", source.to_csv().as_bytes())?;
    write("target.csv", target.to_csv().as_bytes())?;
    if let Some(groups) = &groups {
        write("groups.txt", groups.to_text().as_bytes())?;
    }
    manifest.seed = Some(args.seed);
    manifest.option("kind", format!("{:?}", args.kind).to_lowercase());
    manifest.option("m", args.m);
    manifest.option("n", args.n);
    manifest.option("classes", args.classes);
    manifest.write(&dir.join("generate.manifest"), ctx.deterministic)?;
    println!("wrote {} files to {}", manifest.outputs.len(), dir.display());
    Ok(Outcome::Done)
}
