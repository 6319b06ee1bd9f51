use anyhow::{bail, Context, Result};
use clap::Parser;

use crate::manifest::{read_recorded, sha256_file};
use crate::{Cli, Command, Outcome, ReplayArgs};

/// Re-runs a recorded command from the current directory and checks that
/// every output it recorded has the same digest.
pub fn run(args: ReplayArgs) -> Result<Outcome> {
    let recorded = read_recorded(&args.manifest)?;
    let cli = Cli::try_parse_from(&recorded.command)
        .map_err(|e| anyhow::anyhow!("recorded command does not parse: {e}"))?;
    if matches!(cli.command, Command::Replay(_)) {
        bail!("cannot replay a replay");
    }
    if !cli.deterministic {
        eprintln!("warning: the recorded run was not --deterministic; timing columns will differ");
    }
    // The thread pool of this process is already set up; thread count does
    // not change the results.
    let outcome = super::run(cli, &recorded.command)?;
    let mut mismatched = Vec::new();
    for (path, digest) in &recorded.outputs {
        let now = sha256_file(path.as_ref()).with_context(|| format!("output {path} is missing"))?;
        if &now == digest {
            println!("match {path}");
        } else {
            println!("differ {path}");
            mismatched.push(path.clone());
        }
    }
    if !mismatched.is_empty() {
        bail!("{} output(s) differ from the manifest", mismatched.len());
    }
    Ok(outcome)
}
