//! Run manifests: what was run, on which inputs, producing which outputs.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::io;

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

/// `plan.csv` -> `plan.manifest`.
pub fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest")
}

#[derive(Debug, Default)]
pub struct Manifest {
    pub command: Vec<String>,
    pub options: Map<String, Value>,
    pub seed: Option<u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub wall_clock_ms: Option<f64>,
    pub termination: Option<String>,
    pub summary: Map<String, Value>,
}

impl Manifest {
    pub fn new(command: &[String]) -> Self {
        Manifest {
            command: command.to_vec(),
            ..Manifest::default()
        }
    }

    pub fn option(&mut self, key: &str, value: impl Into<Value>) {
        self.options.insert(key.to_string(), value.into());
    }

    pub fn result(&mut self, key: &str, value: impl Into<Value>) {
        self.summary.insert(key.to_string(), value.into());
    }

    fn digests(paths: &[PathBuf]) -> Result<Map<String, Value>> {
        paths
            .iter()
            .map(|p| Ok((p.display().to_string(), Value::String(sha256_file(p)?))))
            .collect()
    }

    /// Writes the manifest as JSON. `deterministic` drops the wall-clock time
    /// so that repeated runs give identical files.
    pub fn write(&self, path: &Path, deterministic: bool) -> Result<()> {
        let value = json!({
            "tool": "rdrot",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "options": self.options,
            "seed": self.seed,
            "inputs": Self::digests(&self.inputs)?,
            "outputs": Self::digests(&self.outputs)?,
            "wall_clock_ms": if deterministic { None } else { self.wall_clock_ms },
            "termination": self.termination,
            "summary": self.summary,
        });
        let mut text = serde_json::to_string_pretty(&value)?;
        text.push('\n');
        io::write_file(path, text.as_bytes())
    }
}

/// The parts of a manifest needed to replay it.
#[derive(Debug)]
pub struct Recorded {
    pub command: Vec<String>,
    pub outputs: Vec<(String, String)>,
}

pub fn read_recorded(path: &Path) -> Result<Recorded> {
    let text = io::read_text(path)?;
    let value: Value = serde_json::from_str(&text).with_context(|| format!("{} is not JSON", path.display()))?;
    let command = value["command"]
        .as_array()
        .context("manifest has no command")?
        .iter()
        .map(|v| v.as_str().map(str::to_string).context("command entries must be strings"))
        .collect::<Result<Vec<_>>>()?;
    let outputs = value["outputs"]
        .as_object()
        .context("manifest has no outputs")?
        .iter()
        .map(|(k, v)| Ok((k.clone(), v.as_str().context("digests must be strings")?.to_string())))
        .collect::<Result<Vec<_>>>()?;
    Ok(Recorded { command, outputs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_known_input() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("abc.txt");
        io::write_file(&path, b"abc").unwrap();
        assert_eq!(
            sha256_file(&path).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("plan.csv");
        io::write_file(&out, b"1\n").unwrap();
        let mut m = Manifest::new(&["rdrot".into(), "solve".into()]);
        m.outputs.push(out.clone());
        m.wall_clock_ms = Some(12.0);
        let path = manifest_path(&out);
        assert_eq!(path.file_name().unwrap(), "plan.manifest");
        m.write(&path, true).unwrap();
        let text = io::read_text(&path).unwrap();
        assert!(text.contains("\"wall_clock_ms\": null"));
        let rec = read_recorded(&path).unwrap();
        assert_eq!(rec.command, vec!["rdrot", "solve"]);
        assert_eq!(rec.outputs[0].1, sha256_file(&out).unwrap());
    }
}
