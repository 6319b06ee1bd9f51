//! The per-iteration sweep over the plan.
//!
//! One sweep computes `X <- prox_{rho h}([X + phi 1^T + 1 psi^T - rho C]_+)`
//! together with the row sums, column sums and support size of the result.
//! Rows are processed in fixed chunks of [`ROW_CHUNK`]; chunk partials are
//! combined in chunk order, so the outcome is independent of the thread count.

use ndarray::Array2;
use rayon::prelude::*;

use crate::reduce::{combine_pairwise, PAR_THRESHOLD, ROW_CHUNK};
use crate::regularizer::Regularizer;
use crate::Result;

/// How the plan buffer relates to `X` on entry and on exit.
///
/// The fused even/odd schedule stores `X - rho C` after an even iteration so
/// that the following odd iteration does not read `C`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Layout {
    pub shifted_in: bool,
    pub shifted_out: bool,
}

impl Layout {
    pub const PLAIN: Layout = Layout {
        shifted_in: false,
        shifted_out: false,
    };
}

pub(crate) struct SweepSums {
    pub rows: Vec<f64>,
    pub cols: Vec<f64>,
    pub support: usize,
}

struct ChunkSums {
    rows: Vec<f64>,
    cols: Vec<f64>,
    support: usize,
}

struct Inputs<'a> {
    cost: &'a [f64],
    phi: &'a [f64],
    psi: &'a [f64],
    rho: f64,
}

impl Inputs<'_> {
    /// Writes the clamped point `[X + phi_i + psi - rho C]_+` of one row.
    #[inline]
    fn clamp_row(&self, i: usize, row: &mut [f64], c: &[f64], shifted_in: bool) {
        let phi_i = self.phi[i];
        if shifted_in {
            for (x, &psi) in row.iter_mut().zip(self.psi) {
                *x = (*x + phi_i + psi).max(0.0);
            }
        } else {
            let rho = self.rho;
            for ((x, &psi), &c) in row.iter_mut().zip(self.psi).zip(c) {
                *x = (*x + phi_i + psi - rho * c).max(0.0);
            }
        }
    }
}

#[inline]
fn accumulate_row(row: &mut [f64], c: &[f64], rho: f64, cols: &mut [f64], shifted_out: bool) -> (f64, usize) {
    let mut sum = 0.0;
    let mut support = 0;
    for (x, col) in row.iter().zip(cols.iter_mut()) {
        sum += x;
        *col += x;
        support += (*x > 0.0) as usize;
    }
    if shifted_out {
        for (x, &c) in row.iter_mut().zip(c) {
            *x -= rho * c;
        }
    }
    (sum, support)
}

fn map_chunks<F>(data: &mut [f64], cost: &[f64], n: usize, parallel: bool, f: F) -> Vec<Result<ChunkSums>>
where
    F: Fn(usize, &mut [f64], &[f64]) -> Result<ChunkSums> + Sync + Send,
{
    let width = ROW_CHUNK * n;
    if parallel {
        data.par_chunks_mut(width)
            .zip(cost.par_chunks(width))
            .enumerate()
            .map(|(k, (x, c))| f(k * ROW_CHUNK, x, c))
            .collect()
    } else {
        data.chunks_mut(width)
            .zip(cost.chunks(width))
            .enumerate()
            .map(|(k, (x, c))| f(k * ROW_CHUNK, x, c))
            .collect()
    }
}

fn finish(chunks: Vec<Result<ChunkSums>>, deterministic: bool, n: usize) -> Result<SweepSums> {
    let chunks: Vec<ChunkSums> = chunks.into_iter().collect::<Result<_>>()?;
    let support = chunks.iter().map(|c| c.support).sum();
    let rows: Vec<f64> = chunks.iter().flat_map(|c| c.rows.iter().copied()).collect();
    let parts: Vec<Vec<f64>> = chunks.into_iter().map(|c| c.cols).collect();
    let cols = if deterministic {
        combine_pairwise(parts)
    } else {
        // Work-stealing decides the combination tree here.
        parts
            .into_par_iter()
            .reduce(|| vec![0.0; n], |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            })
    };
    Ok(SweepSums { rows, cols, support })
}

/// One full update of the plan buffer.
#[allow(clippy::too_many_arguments)]
pub(crate) fn sweep(
    x: &mut Array2<f64>,
    cost: &Array2<f64>,
    phi: &[f64],
    psi: &[f64],
    rho: f64,
    reg: &dyn Regularizer,
    layout: Layout,
    deterministic: bool,
) -> Result<SweepSums> {
    let n = x.ncols();
    let parallel = x.len() >= PAR_THRESHOLD;
    let inputs = Inputs {
        cost: cost.as_slice().expect("standard layout"),
        phi,
        psi,
        rho,
    };

    if reg.is_row_separable() {
        let chunks = map_chunks(
            x.as_slice_mut().expect("standard layout"),
            inputs.cost,
            n,
            parallel,
            |first, xs, cs| {
                let mut out = ChunkSums {
                    rows: Vec::with_capacity(ROW_CHUNK),
                    cols: vec![0.0; n],
                    support: 0,
                };
                for (k, (row, c)) in xs.chunks_mut(n).zip(cs.chunks(n)).enumerate() {
                    let i = first + k;
                    inputs.clamp_row(i, row, c, layout.shifted_in);
                    reg.prox_row(i, row, rho)?;
                    let (sum, support) = accumulate_row(row, c, rho, &mut out.cols, layout.shifted_out);
                    out.rows.push(sum);
                    out.support += support;
                }
                Ok(out)
            },
        );
        return finish(chunks, deterministic, n);
    }

    // Coupled prox (group lasso): clamp everything, prox, then reduce.
    let clamped = map_chunks(
        x.as_slice_mut().expect("standard layout"),
        inputs.cost,
        n,
        parallel,
        |first, xs, cs| {
            for (k, (row, c)) in xs.chunks_mut(n).zip(cs.chunks(n)).enumerate() {
                inputs.clamp_row(first + k, row, c, layout.shifted_in);
            }
            Ok(ChunkSums {
                rows: Vec::new(),
                cols: Vec::new(),
                support: 0,
            })
        },
    );
    clamped.into_iter().collect::<Result<Vec<_>>>()?;
    reg.prox_in_place(x, rho)?;
    let chunks = map_chunks(
        x.as_slice_mut().expect("standard layout"),
        inputs.cost,
        n,
        parallel,
        |_, xs, cs| {
            let mut out = ChunkSums {
                rows: Vec::with_capacity(ROW_CHUNK),
                cols: vec![0.0; n],
                support: 0,
            };
            for (row, c) in xs.chunks_mut(n).zip(cs.chunks(n)) {
                let (sum, support) = accumulate_row(row, c, rho, &mut out.cols, layout.shifted_out);
                out.rows.push(sum);
                out.support += support;
            }
            Ok(out)
        },
    );
    finish(chunks, deterministic, n)
}

/// Undoes the `X - rho C` storage of the fused schedule.
pub(crate) fn unshift(x: &mut Array2<f64>, cost: &Array2<f64>, rho: f64) {
    x.zip_mut_with(cost, |x, &c| *x += rho * c);
}
