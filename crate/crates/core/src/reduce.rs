//! Fixed-order reductions.
//!
//! The solver splits the plan into row chunks whose size does not depend on
//! the thread count. Partial results are combined here in chunk order, so the
//! same inputs give bit-identical sums on any number of threads.

/// Rows per work item in the parallel sweeps.
pub(crate) const ROW_CHUNK: usize = 16;

/// Below this many entries the sweeps run on the calling thread.
pub(crate) const PAR_THRESHOLD: usize = 1 << 14;

/// Pairwise (cascade) summation in a fixed tree order.
pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Adds the partial vectors together in a fixed pairwise tree over their
/// positions. Panics on an empty list.
pub(crate) fn combine_pairwise(mut parts: Vec<Vec<f64>>) -> Vec<f64> {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut left) = it.next() {
            if let Some(right) = it.next() {
                left.iter_mut().zip(&right).for_each(|(l, r)| *l += r);
            }
            next.push(left);
        }
        parts = next;
    }
    parts.pop().expect("at least one partial sum")
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let prods: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    pairwise_sum(&prods)
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
