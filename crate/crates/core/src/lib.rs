//! Regularized discrete optimal transport by Douglas-Rachford splitting.
//!
//! The solver targets problems of the form
//!
//! ```text
//! minimize   <C, X> + h(X)
//! subject to X 1 = p,  X^T 1 = q,  X >= 0
//! ```
//!
//! where `h` is a *sparsity promoting* regularizer: zeroing an entry of `X`
//! never increases `h(X)`. For such `h` the proximal step of the splitting
//! reduces to a clamp followed by the prox of `h`, and the projection onto
//! the marginal constraints collapses to a rank-two correction that is
//! tracked with a handful of vectors. Every iteration is therefore one pass
//! over the cost matrix plus row and column sums.
//!
//! ## Modules
//!
//! - [`problem`]: problem data, validation, cost normalization, group partitions.
//! - [`regularizer`]: the [`Regularizer`] interface and its instances.
//! - [`solver`]: the splitting iteration, stepsize, initialization and stopping.
//! - [`duality`]: dual potentials, duality gap and the gradient of the OT cost.
//! - [`sinkhorn`]: entropic baselines (plain and log domain).
//! - [`datagen`]: seeded experiment generators and the domain adaptation pipeline.
//!
//! ## Quick start
//!
//! ```
//! use ndarray::array;
//! use rdrot::{solve, Problem, RegularizerKind, SolverOptions};
//!
//! let problem = Problem::new(
//!     array![[0.0, 1.0], [1.0, 0.0]],
//!     array![0.5, 0.5],
//!     array![0.5, 0.5],
//! )
//! .unwrap();
//! let options = SolverOptions { tol_primal: 1e-8, ..SolverOptions::default() };
//! let report = solve(&problem, &RegularizerKind::Zero, &options).unwrap();
//! assert!(report.plan.entries()[[0, 1]] < 1e-8);
//! ```

pub mod datagen;
pub mod duality;
mod error;
pub mod problem;
mod reduce;
pub mod regularizer;
pub mod sinkhorn;
pub mod solver;

pub use error::{Error, Result};
pub use problem::{CostScale, GroupPartition, Problem, TransportPlan};
pub use regularizer::{Regularizer, RegularizerKind};
pub use solver::{
    default_init, default_stepsize, solve, step, Init, SolveReport, SolverOptions, SolverState,
    Stepsize, Termination, TraceRecord,
};
