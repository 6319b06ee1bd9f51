use ndarray::{Array1, Array2};
use rdrot::Problem;

use crate::projection::affine_project;
use crate::Result;

/// Iterates of the textbook splitting `x = prox_f(y)`, `z = P(2x - y)`,
/// `y <- y + z - x`, with `P` the exact affine projection.
#[derive(Debug, Clone, PartialEq)]
pub struct DrTrajectory {
    /// `x_1, ..., x_K`.
    pub xs: Vec<Array2<f64>>,
    /// `y_1, ..., y_K`.
    pub ys: Vec<Array2<f64>>,
}

/// Runs `iterations` steps from `y_0 = x0 + phi0 1^T + 1 psi0^T`.
pub fn textbook_dr(
    problem: &Problem,
    x0: &Array2<f64>,
    phi0: &Array1<f64>,
    psi0: &Array1<f64>,
    iterations: usize,
    mut prox_f: impl FnMut(&Array2<f64>) -> Result<Array2<f64>>,
) -> Result<DrTrajectory> {
    let p = problem.p().to_vec();
    let q = problem.q().to_vec();
    let mut y = Array2::from_shape_fn(x0.dim(), |(i, j)| x0[[i, j]] + phi0[i] + psi0[j]);
    let mut out = DrTrajectory {
        xs: Vec::with_capacity(iterations),
        ys: Vec::with_capacity(iterations),
    };
    for _ in 0..iterations {
        let x = prox_f(&y)?;
        let z = affine_project(&(2.0 * &x - &y), &p, &q)?;
        y = &y + &z - &x;
        out.xs.push(x);
        out.ys.push(y.clone());
    }
    Ok(out)
}
