//! Slow, independent reference solvers for checking `rdrot`.
//!
//! Nothing here shares an update routine with the main solver. The LP oracle
//! enumerates vertices of the transport polytope, projections are computed
//! from their KKT systems with dense linear algebra, and smooth regularized
//! problems are solved by projected gradient. Everything is single threaded
//! and meant for problems with a few dozen entries.

mod dr;
mod fd;
mod linalg;
mod lp;
mod projection;
mod projgrad;
mod prox;

use ndarray::Array2;
use thiserror::Error;

pub use dr::{textbook_dr, DrTrajectory};
pub use fd::{finite_diff_gradient, finite_diff_gradient_with};
pub use linalg::solve_dense;
pub use lp::lp_vertex_solve;
pub use projection::{affine_project, dykstra_project, polytope_project};
pub use projgrad::projgrad_solve;
pub use prox::{prox_f_oracle, ProxOracleOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("problem too large for vertex enumeration ({m}x{n})")]
    TooLarge { m: usize, n: usize },
    #[error("{0} did not converge")]
    NoConvergence(&'static str),
    #[error("{0} is not supported by this oracle")]
    Unsupported(String),
    #[error("singular linear system")]
    SingularSystem,
    #[error(transparent)]
    Solver(#[from] rdrot::Error),
}

pub type Result<T> = std::result::Result<T, OracleError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    VertexEnum,
    ProjGrad,
    KktProjection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub plan: Array2<f64>,
    pub value: f64,
    pub method: OracleMethod,
}

/// `max(||X 1 - p||_2, ||X^T 1 - q||_2)` computed with plain loops.
pub fn feasibility_residual(x: &Array2<f64>, p: &[f64], q: &[f64]) -> f64 {
    let (m, n) = x.dim();
    let mut rows = 0.0;
    for i in 0..m {
        let s: f64 = (0..n).map(|j| x[[i, j]]).sum();
        rows += (s - p[i]).powi(2);
    }
    let mut cols = 0.0;
    for j in 0..n {
        let s: f64 = (0..m).map(|i| x[[i, j]]).sum();
        cols += (s - q[j]).powi(2);
    }
    rows.sqrt().max(cols.sqrt())
}
