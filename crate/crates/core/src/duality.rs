//! Dual potentials, duality gap and the gradient of the OT cost.
//!
//! The dual of `min <C, X> + h(X)` over the transport polytope is
//!
//! ```text
//! maximize  p^T mu + q^T nu - h^*([mu 1^T + 1 nu^T - C]_+)
//! ```
//!
//! The iterates carry estimates `mu = phi / rho` and `nu = psi / rho`. The
//! argument of `h^*` is read off the slack `U = [X_bar - X]_+` of the next
//! clamp, divided by `rho`.

use ndarray::{Array1, Array2};

use crate::problem::Problem;
use crate::reduce::dot;
use crate::regularizer::Regularizer;
use crate::solver::{solve, SolverOptions, SolverState};
use crate::Result;

/// Dual estimate attached to an iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct DualCertificate {
    pub mu: Array1<f64>,
    pub nu: Array1<f64>,
    /// `p^T mu + q^T nu - h^*(U / rho)` (finite part).
    pub dual_value: f64,
    /// Primal objective at `X_k` minus `dual_value`.
    pub gap: f64,
    /// Distance of the dual estimate from the domain of `h^*`.
    pub dual_residual: f64,
}

/// `(phi / rho, psi / rho)`.
pub fn recover_duals(state: &SolverState, rho: f64) -> (Array1<f64>, Array1<f64>) {
    (&state.phi / rho, &state.psi / rho)
}

/// `X_bar = [X + phi 1^T + 1 psi^T - rho C]_+`.
pub fn clamped_point(problem: &Problem, state: &SolverState, rho: f64) -> Array2<f64> {
    let mut x_bar = state.x.clone();
    for ((i, j), v) in x_bar.indexed_iter_mut() {
        *v = (*v + state.phi[i] + state.psi[j] - rho * problem.cost()[[i, j]]).max(0.0);
    }
    x_bar
}

/// Duality gap and dual residual of the iterate in `state`.
///
/// Before convergence `X_k` is not feasible, so the gap may have either sign.
pub fn duality_gap(problem: &Problem, reg: &dyn Regularizer, state: &SolverState, rho: f64) -> DualCertificate {
    let (mu, nu) = recover_duals(state, rho);
    let x_bar = clamped_point(problem, state, rho);
    let linear = dot(problem.p().as_slice().unwrap(), mu.as_slice().unwrap())
        + dot(problem.q().as_slice().unwrap(), nu.as_slice().unwrap());
    let dual_value = linear - reg.conjugate_gap_term(&state.x, &x_bar, rho);
    let primal = problem.linear_cost(&state.x) + reg.value(&state.x);
    DualCertificate {
        mu,
        nu,
        dual_value,
        gap: primal - dual_value,
        dual_residual: reg.dual_residual(&state.x, &x_bar, rho),
    }
}

/// Value of `OT_h(C) = min <C, X> + h(X)` and its gradient `X^*` with respect
/// to `C`.
///
/// The gradient is that of the minimization value: ascent on the transport
/// cost moves along `+X^*`. When the optimal plan is not unique (`h = 0`) the
/// returned plan is the one the solver converges to, which is a subgradient.
pub fn ot_cost_gradient(
    problem: &Problem,
    reg: &dyn Regularizer,
    options: &SolverOptions,
) -> Result<(f64, Array2<f64>)> {
    let report = solve(problem, reg, options)?;
    Ok((report.objective, report.plan.into_inner()))
}
