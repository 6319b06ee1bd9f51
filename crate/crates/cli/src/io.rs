//! Dense matrix and vector files.
//!
//! Text files hold comma-separated numbers, one matrix row per line. Blank
//! lines and lines starting with `#` are skipped. Binary matrices carry a
//! 16-byte header (`OTPB`, `u32` rows, `u32` columns, four zero bytes)
//! followed by row-major little-endian `f64` values.

use std::fs;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use ndarray::{Array1, Array2};

const MAGIC: &[u8; 4] = b"OTPB";
const HEADER_LEN: usize = 16;

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("cannot read {}", path.display()))
}

fn parse_rows(text: &str, path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .with_context(|| format!("{}:{}: bad number {:?}", path.display(), lineno + 1, f.trim()))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Reads a text or binary matrix; the format is detected from the magic bytes.
pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let bytes = read_bytes(path)?;
    if bytes.starts_with(MAGIC) {
        return decode_binary(&bytes).with_context(|| format!("{}: malformed binary matrix", path.display()));
    }
    let text = String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8 text", path.display()))?;
    let rows = parse_rows(&text, path)?;
    ensure!(!rows.is_empty(), "{} holds no numbers", path.display());
    let n = rows[0].len();
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        bail!("{}: row {} has {} entries, expected {n}", path.display(), i + 1, r.len());
    }
    let m = rows.len();
    Ok(Array2::from_shape_vec((m, n), rows.concat())?)
}

/// Reads a vector written either as one row or one value per line.
pub fn read_vector(path: &Path) -> Result<Array1<f64>> {
    let bytes = read_bytes(path)?;
    let text = String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8 text", path.display()))?;
    let values = parse_rows(&text, path)?.concat();
    ensure!(!values.is_empty(), "{} holds no numbers", path.display());
    Ok(Array1::from(values))
}

fn decode_binary(bytes: &[u8]) -> Result<Array2<f64>> {
    ensure!(bytes.len() >= HEADER_LEN, "header is truncated");
    let word = |k: usize| u32::from_le_bytes(bytes[k..k + 4].try_into().unwrap()) as usize;
    let (m, n) = (word(4), word(8));
    ensure!(bytes[12..16] == [0; 4], "reserved header bytes are not zero");
    let body = &bytes[HEADER_LEN..];
    ensure!(
        body.len() == m * n * 8,
        "expected {} bytes of data for {m}x{n}, found {}",
        m * n * 8,
        body.len()
    );
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Array2::from_shape_vec((m, n), values)?)
}

pub fn encode_binary(a: &Array2<f64>) -> Result<Vec<u8>> {
    let (m, n) = a.dim();
    let m32 = u32::try_from(m).context("too many rows for the binary format")?;
    let n32 = u32::try_from(n).context("too many columns for the binary format")?;
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * m * n);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&m32.to_le_bytes());
    out.extend_from_slice(&n32.to_le_bytes());
    out.extend_from_slice(&[0; 4]);
    for v in a.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn matrix_to_csv(a: &Array2<f64>) -> String {
    let mut out = String::new();
    for row in a.outer_iter() {
        let fields: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Writes a matrix as text, or in the binary format when the extension is `bin`.
pub fn write_matrix(path: &Path, a: &Array2<f64>) -> Result<()> {
    let bytes = if path.extension().is_some_and(|e| e == "bin") {
        encode_binary(a)?
    } else {
        matrix_to_csv(a).into_bytes()
    };
    write_file(path, &bytes)
}

/// One value per line.
pub fn vector_to_csv(v: &Array1<f64>) -> String {
    v.iter().map(|x| format!("{x:?}\n")).collect()
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

/// Cells listed as `i,j`, one per line.
pub fn read_cells(path: &Path) -> Result<Vec<(usize, usize)>> {
    let text = read_text(path)?;
    let mut cells = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parsed = line
            .split_once(',')
            .and_then(|(i, j)| Some((i.trim().parse().ok()?, j.trim().parse().ok()?)));
        match parsed {
            Some(cell) => cells.push(cell),
            None => bail!("{}:{}: expected `i,j`, got {line:?}", path.display(), lineno + 1),
        }
    }
    Ok(cells)
}
