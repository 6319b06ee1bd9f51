use ndarray::Array2;
use rdrot::Problem;

use crate::{OracleError, OracleMethod, OracleSolution, Result};

/// Exact unregularized OT by enumerating the basic feasible solutions of the
/// transport polytope.
///
/// A basis is a spanning tree of the bipartite graph on rows and columns; its
/// flows follow from peeling leaves. Ties keep the first vertex in
/// lexicographic order of the chosen cells.
pub fn lp_vertex_solve(problem: &Problem) -> Result<OracleSolution> {
    let (m, n) = problem.dim();
    if m * n > 12 && (m > 4 || n > 4) {
        return Err(OracleError::TooLarge { m, n });
    }
    let p: Vec<f64> = problem.p().to_vec();
    let q: Vec<f64> = problem.q().to_vec();
    let cells: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let k = m + n - 1;

    let mut best: Option<(f64, Array2<f64>)> = None;
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let chosen: Vec<(usize, usize)> = idx.iter().map(|&c| cells[c]).collect();
        if let Some(flows) = tree_flows(&chosen, &p, &q, m, n) {
            let mut plan = Array2::zeros((m, n));
            let mut value = 0.0;
            for (&(i, j), &f) in chosen.iter().zip(&flows) {
                plan[[i, j]] = f;
                value += problem.cost()[[i, j]] * f;
            }
            if best.as_ref().is_none_or(|(v, _)| value < *v - 1e-15) {
                best = Some((value, plan));
            }
        }
        if !next_combination(&mut idx, cells.len()) {
            break;
        }
    }
    let (value, plan) = best.expect("the transport polytope always has a vertex");
    Ok(OracleSolution {
        plan,
        value,
        method: OracleMethod::VertexEnum,
    })
}

fn next_combination(idx: &mut [usize], total: usize) -> bool {
    let k = idx.len();
    let mut pos = k;
    while pos > 0 {
        pos -= 1;
        if idx[pos] < total - k + pos {
            idx[pos] += 1;
            for t in pos + 1..k {
                idx[t] = idx[t - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Flows of a spanning-tree basis, or `None` if the cells contain a cycle or
/// the flows are negative.
fn tree_flows(cells: &[(usize, usize)], p: &[f64], q: &[f64], m: usize, n: usize) -> Option<Vec<f64>> {
    // Nodes 0..m are rows, m..m+n columns.
    let mut parent: Vec<usize> = (0..m + n).collect();
    fn find(parent: &mut [usize], mut a: usize) -> usize {
        while parent[a] != a {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        a
    }
    for &(i, j) in cells {
        let (a, b) = (find(&mut parent, i), find(&mut parent, m + j));
        if a == b {
            return None;
        }
        parent[a] = b;
    }

    let mut supply: Vec<f64> = p.iter().chain(q).copied().collect();
    let mut degree = vec![0usize; m + n];
    for &(i, j) in cells {
        degree[i] += 1;
        degree[m + j] += 1;
    }
    let mut flows = vec![f64::NAN; cells.len()];
    let mut alive = vec![true; cells.len()];
    for _ in 0..cells.len() {
        let (e, leaf) = cells.iter().enumerate().find_map(|(e, &(i, j))| {
            if !alive[e] {
                None
            } else if degree[i] == 1 {
                Some((e, i))
            } else if degree[m + j] == 1 {
                Some((e, m + j))
            } else {
                None
            }
        })?;
        let (i, j) = cells[e];
        let other = if leaf == i { m + j } else { i };
        let f = supply[leaf];
        if f < -1e-12 {
            return None;
        }
        let f = f.max(0.0);
        flows[e] = f;
        supply[leaf] = 0.0;
        supply[other] -= f;
        degree[i] -= 1;
        degree[m + j] -= 1;
        alive[e] = false;
    }
    Some(flows)
}
