use ndarray::Array2;
use rdrot::{Problem, RegularizerKind};

use crate::{lp_vertex_solve, projgrad_solve, Result};

/// Central differences of `OT_h(C)` with respect to each `C_ij`, with the
/// value computed by [`lp_vertex_solve`] for `h = 0` and [`projgrad_solve`]
/// otherwise.
pub fn finite_diff_gradient(problem: &Problem, reg: &RegularizerKind, eps: f64) -> Result<Array2<f64>> {
    finite_diff_gradient_with(problem, eps, |p| match reg {
        RegularizerKind::Zero => Ok(lp_vertex_solve(p)?.value),
        other => Ok(projgrad_solve(p, other)?.value),
    })
}

/// Central differences of an arbitrary value function of the cost. Entries
/// closer to zero than `eps` use a forward difference to keep the cost
/// non-negative.
pub fn finite_diff_gradient_with(
    problem: &Problem,
    eps: f64,
    value: impl Fn(&Problem) -> Result<f64>,
) -> Result<Array2<f64>> {
    let (m, n) = problem.dim();
    let mut grad = Array2::zeros((m, n));
    let base = if problem.cost().iter().any(|&c| c < eps) {
        Some(value(problem)?)
    } else {
        None
    };
    for i in 0..m {
        for j in 0..n {
            let shifted = |delta: f64| -> Result<f64> {
                let mut c = problem.cost().clone();
                c[[i, j]] += delta;
                value(&problem.with_cost(c)?)
            };
            let cij = problem.cost()[[i, j]];
            grad[[i, j]] = if cij >= eps {
                (shifted(eps)? - shifted(-eps)?) / (2.0 * eps)
            } else {
                (shifted(eps)? - base.expect("computed above")) / eps
            };
        }
    }
    Ok(grad)
}
