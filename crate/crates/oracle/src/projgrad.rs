use ndarray::Array2;
use rdrot::{Problem, RegularizerKind};

use crate::projection::polytope_project;
use crate::{OracleError, OracleMethod, OracleSolution, Result};

/// Reference minimizer of `<C, X> + h(X)` over the transport polytope for
/// smooth `h`.
///
/// - Quadratic `h = (alpha / 2) ||X||^2`: the minimizer is the projection of
///   `-C / alpha` onto the polytope, computed exactly.
/// - Hypentropic: projected gradient with step `beta` (the inverse Lipschitz
///   constant of `asinh(x / beta)`), until the gradient mapping is below 1e-12.
pub fn projgrad_solve(problem: &Problem, reg: &RegularizerKind) -> Result<OracleSolution> {
    let c = problem.cost();
    let p = problem.p().to_vec();
    let q = problem.q().to_vec();
    match reg {
        RegularizerKind::Quadratic(quad) => {
            let alpha = quad.alpha();
            let plan = polytope_project(&c.mapv(|v| -v / alpha), &p, &q, None)?;
            let value = linear(c, &plan) + 0.5 * alpha * plan.iter().map(|v| v * v).sum::<f64>();
            Ok(OracleSolution {
                plan,
                value,
                method: OracleMethod::KktProjection,
            })
        }
        RegularizerKind::Hypentropic(h) => {
            let beta = h.beta();
            let plan = projected_gradient(problem, beta, 1e-12, 1_000_000, |x| {
                Array2::from_shape_fn(x.dim(), |(i, j)| c[[i, j]] + (x[[i, j]] / beta).asinh())
            })?;
            let value = linear(c, &plan)
                + plan
                    .iter()
                    .map(|&x| x * (x / beta).asinh() - (x * x + beta * beta).sqrt())
                    .sum::<f64>();
            Ok(OracleSolution {
                plan,
                value,
                method: OracleMethod::ProjGrad,
            })
        }
        other => Err(OracleError::Unsupported(other.to_string())),
    }
}

fn linear(c: &Array2<f64>, x: &Array2<f64>) -> f64 {
    c.iter().zip(x.iter()).map(|(a, b)| a * b).sum()
}

/// `X <- P(X - step * grad(X))` from `p q^T` until
/// `||X_new - X||_F / step <= tol`.
pub(crate) fn projected_gradient(
    problem: &Problem,
    step: f64,
    tol: f64,
    max_iter: usize,
    grad: impl Fn(&Array2<f64>) -> Array2<f64>,
) -> Result<Array2<f64>> {
    let p = problem.p().to_vec();
    let q = problem.q().to_vec();
    let mut x = Array2::from_shape_fn(problem.dim(), |(i, j)| p[i] * q[j]);
    for _ in 0..max_iter {
        let next = polytope_project(&(&x - &(step * &grad(&x))), &p, &q, None)?;
        let moved = (&next - &x).iter().map(|v| v * v).sum::<f64>().sqrt() / step;
        x = next;
        if moved <= tol {
            return Ok(x);
        }
    }
    Err(OracleError::NoConvergence("projected gradient"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{feasibility_residual, lp_vertex_solve};
    use ndarray::array;

    fn problem() -> Problem {
        Problem::new(
            array![[0.1, 0.9, 0.4], [0.7, 0.2, 0.5], [0.3, 0.6, 1.0]],
            array![0.2, 0.5, 0.3],
            array![0.4, 0.4, 0.2],
        )
        .unwrap()
    }

    #[test]
    fn exact_projection_matches_projected_gradient() {
        let alpha = 0.3;
        let reg = RegularizerKind::quadratic(alpha).unwrap();
        let exact = projgrad_solve(&problem(), &reg).unwrap();
        let c = problem().cost().clone();
        let pg = projected_gradient(&problem(), 1.0 / alpha, 1e-12, 100_000, |x| &c + &(alpha * x)).unwrap();
        assert!((&exact.plan - &pg).iter().all(|v| v.abs() < 1e-10));
        assert!(feasibility_residual(&exact.plan, &[0.2, 0.5, 0.3], &[0.4, 0.4, 0.2]) <= 1e-10);
    }

    #[test]
    fn strong_regularization_moves_towards_independence() {
        let diag = Problem::new(array![[0.0, 1.0], [1.0, 0.0]], array![0.5, 0.5], array![0.5, 0.5]).unwrap();
        let lp = lp_vertex_solve(&diag).unwrap();
        let sol = projgrad_solve(&diag, &RegularizerKind::quadratic(10.0).unwrap()).unwrap();
        assert!(sol.value > lp.value);
        assert!(sol.plan[[0, 1]] > 0.0);
    }

    #[test]
    fn vanishing_regularization_recovers_the_lp_plan() {
        let lp = lp_vertex_solve(&problem()).unwrap();
        let sol = projgrad_solve(&problem(), &RegularizerKind::quadratic(1e-8).unwrap()).unwrap();
        assert!((&sol.plan - &lp.plan).iter().all(|v| v.abs() < 1e-4));
    }

    #[test]
    fn hypentropic_is_stationary() {
        let beta = 0.5;
        let sol = projgrad_solve(&problem(), &RegularizerKind::hypentropic(beta).unwrap()).unwrap();
        assert!(feasibility_residual(&sol.plan, &[0.2, 0.5, 0.3], &[0.4, 0.4, 0.2]) <= 1e-10);
        // The gradient restricted to the support is of the form mu 1^T + 1 nu^T.
        let g = Array2::from_shape_fn((3, 3), |(i, j)| problem().cost()[[i, j]] + (sol.plan[[i, j]] / beta).asinh());
        assert!([[1, 0], [1, 1], [2, 0], [2, 1]].iter().all(|&[i, j]| sol.plan[[i, j]] > 0.0));
        let resid = g[[1, 0]] - g[[1, 1]] - g[[2, 0]] + g[[2, 1]];
        assert!(resid.abs() < 1e-9, "{resid}");
    }

    #[test]
    fn unsupported_regularizers() {
        assert!(matches!(
            projgrad_solve(&problem(), &RegularizerKind::Zero),
            Err(OracleError::Unsupported(_))
        ));
    }
}
