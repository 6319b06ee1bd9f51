//! The Douglas-Rachford iteration for regularized OT.
//!
//! With `f(X) = <C, X> + h(X) + iota_{X >= 0}` and `g` the indicator of the
//! marginal constraints, one iteration reads
//!
//! ```text
//! X_{k+1} = prox_{rho h}([Y_k - rho C]_+)
//! Y_{k+1} = X_{k+1} + phi_{k+1} 1^T + 1 psi_{k+1}^T
//! ```
//!
//! `Y` is never stored. The correction vectors follow from the row and column
//! residuals `r = X 1 - p`, `s = X^T 1 - q` through the recurrence
//!
//! ```text
//! eta     = sum(r) / (m + n)
//! phi'    = (a - 2 r + (2 eta - theta) 1_m) / n
//! psi'    = (b - 2 s + (2 eta - theta) 1_n) / m
//! theta'  = theta - eta,  a' = a - r,  b' = b - s
//! ```
//!
//! which reproduces the textbook iteration with the exact affine projection
//! whenever `a_0 = r_0 + n phi_0`, `b_0 = s_0 + m psi_0` and
//! `theta_0 = sum(r_0) / (m + n)`.

mod kernel;
pub mod trace;

use std::time::Instant;

use ndarray::{Array1, Array2};

use crate::duality::{duality_gap, DualCertificate};
use crate::problem::{Problem, TransportPlan};
use crate::reduce::{norm2, pairwise_sum};
use crate::regularizer::Regularizer;
use crate::{Error, Result};

use kernel::{sweep, unshift, Layout};
pub use trace::{linear_fit, TraceAnalysis, TraceRecord, TRACE_CSV_HEADER};

/// `rho = 2 / (m + n)`, the stepsize for costs normalized to `max C = 1`.
pub fn default_stepsize(m: usize, n: usize) -> f64 {
    2.0 / (m + n) as f64
}

/// The skip-ahead starting point `X_0 = 0`,
/// `phi_0 = (1 + m/(m+n)) / (3(m+n)) 1_m`, `psi_0 = (1 + n/(m+n)) / (3(m+n)) 1_n`.
pub fn default_init(m: usize, n: usize) -> (Array2<f64>, Array1<f64>, Array1<f64>) {
    let total = (m + n) as f64;
    let phi = (1.0 + m as f64 / total) / (3.0 * total);
    let psi = (1.0 + n as f64 / total) / (3.0 * total);
    (
        Array2::zeros((m, n)),
        Array1::from_elem(m, phi),
        Array1::from_elem(n, psi),
    )
}

/// Number of all-zero iterates the skip-ahead initialization is designed to
/// jump over when starting from `X_0 = p q^T`, `phi_0 = psi_0 = 0`:
///
/// `N = min_ij ceil(C_ij * rho m n / 2 / (m p_i + n q_j + 1) - 1)`, clamped at 0.
///
/// At the default stepsize `rho m n / 2 = m n / (m + n)`. The count is a
/// diagnostic estimate; on normalized costs it is a lower bound on the number
/// of zero iterates actually produced.
pub fn compute_skip_count(problem: &Problem, rho: f64) -> usize {
    let (m, n) = problem.dim();
    let scale = rho * (m * n) as f64 / 2.0;
    let mut best = f64::INFINITY;
    for ((i, j), &c) in problem.cost().indexed_iter() {
        let denom = m as f64 * problem.p()[i] + n as f64 * problem.q()[j] + 1.0;
        best = best.min((c * scale / denom - 1.0).ceil());
    }
    best.max(0.0) as usize
}

/// Stepsize choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stepsize {
    /// [`default_stepsize`].
    Auto,
    Fixed(f64),
}

/// Starting point of the iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// [`default_init`].
    SkipAhead,
    /// `X_0 = p q^T`, `phi_0 = psi_0 = 0`.
    Product,
    /// Caller-provided `X_0`, `phi_0`, `psi_0`.
    Warm {
        x0: Array2<f64>,
        phi0: Array1<f64>,
        psi0: Array1<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub rho: Stepsize,
    pub max_iter: usize,
    /// Stop once `max(||X 1 - p||_2, ||X^T 1 - q||_2)` is at most this.
    pub tol_primal: f64,
    /// When set, also require `|gap|` and the dual residual to be at most this.
    pub tol_gap: Option<f64>,
    pub check_every: usize,
    /// Fixed-order reductions: bit-identical results on any thread count.
    pub deterministic: bool,
    pub record_trace: bool,
    pub init: Init,
    /// Even/odd schedule that reads `C` only every second iteration.
    pub fused: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            rho: Stepsize::Auto,
            max_iter: 100_000,
            tol_primal: 1e-4,
            tol_gap: None,
            check_every: 1,
            deterministic: true,
            record_trace: false,
            init: Init::SkipAhead,
            fused: false,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::ZeroIterations);
        }
        if let Stepsize::Fixed(rho) = self.rho {
            if !(rho > 0.0 && rho.is_finite()) {
                return Err(Error::invalid("rho", format!("must be positive, got {rho}")));
            }
        }
        if !(self.tol_primal > 0.0) {
            return Err(Error::invalid("tol_primal", "must be positive"));
        }
        if let Some(t) = self.tol_gap {
            if !(t > 0.0) {
                return Err(Error::invalid("tol_gap", "must be positive"));
            }
        }
        if self.check_every == 0 {
            return Err(Error::invalid("check_every", "must be at least 1"));
        }
        Ok(())
    }

    pub fn resolve_rho(&self, m: usize, n: usize) -> f64 {
        match self.rho {
            Stepsize::Auto => default_stepsize(m, n),
            Stepsize::Fixed(rho) => rho,
        }
    }
}

/// Iterate and recurrence variables. `Y_k = X_k + phi_k 1^T + 1 psi_k^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub x: Array2<f64>,
    pub phi: Array1<f64>,
    pub psi: Array1<f64>,
    pub a: Array1<f64>,
    pub b: Array1<f64>,
    pub theta: f64,
    /// `X_k 1 - p`.
    pub r: Array1<f64>,
    /// `X_k^T 1 - q`.
    pub s: Array1<f64>,
    pub eta: f64,
    pub k: usize,
    /// Support size of `X_k`.
    pub support: usize,
}

impl SolverState {
    /// State at `Y_0 = x0 + phi0 1^T + 1 psi0^T`, with the recurrence
    /// variables chosen so that the next step equals the exact DR step.
    pub fn new(problem: &Problem, x0: Array2<f64>, phi0: Array1<f64>, psi0: Array1<f64>) -> Result<Self> {
        let (m, n) = problem.dim();
        if x0.dim() != (m, n) || phi0.len() != m || psi0.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "warm start has X {:?}, phi {}, psi {} for a {m}x{n} problem",
                x0.dim(),
                phi0.len(),
                psi0.len()
            )));
        }
        let x0 = x0.as_standard_layout().to_owned();
        let r = x0.sum_axis(ndarray::Axis(1)) - problem.p();
        let s = x0.sum_axis(ndarray::Axis(0)) - problem.q();
        let eta = sum(&r) / (m + n) as f64;
        let a = &r + &(&phi0 * n as f64);
        let b = &s + &(&psi0 * m as f64);
        let support = x0.iter().filter(|&&v| v > 0.0).count();
        Ok(SolverState {
            x: x0,
            phi: phi0,
            psi: psi0,
            a,
            b,
            theta: eta,
            r,
            s,
            eta,
            k: 0,
            support,
        })
    }

    pub fn from_init(problem: &Problem, init: &Init) -> Result<Self> {
        let (m, n) = problem.dim();
        match init {
            Init::SkipAhead => {
                let (x0, phi0, psi0) = default_init(m, n);
                SolverState::new(problem, x0, phi0, psi0)
            }
            Init::Product => {
                let x0 = Array2::from_shape_fn((m, n), |(i, j)| problem.p()[i] * problem.q()[j]);
                SolverState::new(problem, x0, Array1::zeros(m), Array1::zeros(n))
            }
            Init::Warm { x0, phi0, psi0 } => SolverState::new(problem, x0.clone(), phi0.clone(), psi0.clone()),
        }
    }

    /// `max(||r||_2, ||s||_2)`.
    pub fn r_primal(&self) -> f64 {
        norm2(self.r.as_slice().unwrap()).max(norm2(self.s.as_slice().unwrap()))
    }

    /// The implicit `Y_k`.
    pub fn y(&self) -> Array2<f64> {
        let mut y = self.x.clone();
        for ((i, j), v) in y.indexed_iter_mut() {
            *v += self.phi[i] + self.psi[j];
        }
        y
    }

    fn advance(
        &mut self,
        problem: &Problem,
        reg: &dyn Regularizer,
        rho: f64,
        layout: Layout,
        deterministic: bool,
    ) -> Result<()> {
        let (m, n) = problem.dim();
        let sums = sweep(
            &mut self.x,
            problem.cost(),
            self.phi.as_slice().unwrap(),
            self.psi.as_slice().unwrap(),
            rho,
            reg,
            layout,
            deterministic,
        )?;
        self.k += 1;
        let r = Array1::from(sums.rows) - problem.p();
        let s = Array1::from(sums.cols) - problem.q();
        if r.iter().chain(s.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteIterate { iteration: self.k });
        }
        let eta = sum(&r) / (m + n) as f64;
        let shift = 2.0 * eta - self.theta;
        self.phi = (&self.a - &(2.0 * &r)).mapv(|v| (v + shift) / n as f64);
        self.psi = (&self.b - &(2.0 * &s)).mapv(|v| (v + shift) / m as f64);
        if self.phi.iter().chain(self.psi.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteIterate { iteration: self.k });
        }
        self.theta -= eta;
        self.a -= &r;
        self.b -= &s;
        self.r = r;
        self.s = s;
        self.eta = eta;
        self.support = sums.support;
        Ok(())
    }
}

fn sum(v: &Array1<f64>) -> f64 {
    pairwise_sum(v.as_slice().expect("contiguous"))
}

/// One iteration: `X <- prox_{rho h}([X + phi 1^T + 1 psi^T - rho C]_+)`,
/// followed by the recurrence update.
pub fn step(state: &mut SolverState, problem: &Problem, reg: &dyn Regularizer, rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::invalid("rho", format!("must be positive, got {rho}")));
    }
    reg.check_dims(problem.rows(), problem.cols())?;
    state.advance(problem, reg, rho, Layout::PLAIN, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIter,
    Stalled,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxIter => "max_iter",
            Termination::Stalled => "stalled",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub plan: TransportPlan,
    pub objective: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub r_primal: f64,
    pub trace: Vec<TraceRecord>,
    pub rho: f64,
    /// Final iterate, including the dual estimates `phi`, `psi`. `None` for
    /// solvers other than the splitting method.
    pub state: Option<SolverState>,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

/// Relative improvement of the best primal residual below which a window of
/// iterations counts as stalled.
pub const STALL_RELATIVE_IMPROVEMENT: f64 = 1e-14;
/// Largest change of `X` over a window, relative to `max |X|`, for the
/// window to count as stalled.
pub const STALL_RELATIVE_MOVE: f64 = 1e-10;
/// Length of the stall-detection window.
pub const STALL_WINDOW: usize = 10_000;

/// Runs the iteration until the stopping rule holds or `max_iter` is reached.
///
/// The default stepsize assumes a cost normalized to `max C = 1`
/// (see [`Problem::normalize_cost`]).
pub fn solve(problem: &Problem, reg: &dyn Regularizer, options: &SolverOptions) -> Result<SolveReport> {
    options.validate()?;
    let (m, n) = problem.dim();
    reg.check_dims(m, n)?;
    let rho = options.resolve_rho(m, n);
    let mut state = SolverState::from_init(problem, &options.init)?;
    let started = Instant::now();
    let mut trace = Vec::new();
    let mut shifted = false;
    let mut best_before = state.r_primal();
    let mut best = best_before;
    let mut snapshot = state.x.clone();
    let mut termination = Termination::MaxIter;

    for k in 1..=options.max_iter {
        let layout = if options.fused {
            Layout {
                shifted_in: shifted,
                shifted_out: !shifted,
            }
        } else {
            Layout::PLAIN
        };
        state.advance(problem, reg, rho, layout, options.deterministic)?;
        shifted = layout.shifted_out;

        if k % options.check_every != 0 && k != options.max_iter {
            continue;
        }
        let r_primal = state.r_primal();
        best = best.min(r_primal);
        let need_gap = options.record_trace || (options.tol_gap.is_some() && r_primal <= options.tol_primal);
        let cert = if need_gap {
            Some(certificate_of(&state, shifted, problem, reg, rho))
        } else {
            None
        };
        if options.record_trace {
            trace.push(TraceRecord {
                iter: k,
                r_primal,
                gap: cert.as_ref().map(|c| c.gap),
                dual_residual: cert.as_ref().map(|c| c.dual_residual),
                support: state.support,
                elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
            });
        }
        let gap_ok = match (options.tol_gap, &cert) {
            (None, _) => true,
            (Some(tol), Some(c)) => c.gap.abs() <= tol && c.dual_residual <= tol,
            (Some(_), None) => false,
        };
        if r_primal <= options.tol_primal && gap_ok {
            termination = Termination::Converged;
            break;
        }
        if k % STALL_WINDOW == 0 {
            let no_progress = best_before - best < STALL_RELATIVE_IMPROVEMENT * best_before;
            if no_progress && window_move(&state.x, &snapshot) {
                termination = Termination::Stalled;
                break;
            }
            best_before = best;
            snapshot.assign(&state.x);
        }
    }

    if shifted {
        unshift(&mut state.x, problem.cost(), rho);
    }
    let plan = TransportPlan::new(state.x.clone());
    let objective = problem.primal_objective(plan.entries(), reg)?;
    Ok(SolveReport {
        plan,
        objective,
        iterations: state.k,
        termination,
        r_primal: state.r_primal(),
        trace,
        rho,
        state: Some(state),
    })
}

/// Whether `X` moved by at most [`STALL_RELATIVE_MOVE`] of its scale.
fn window_move(x: &Array2<f64>, snapshot: &Array2<f64>) -> bool {
    let scale = x.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let moved = x.iter().zip(snapshot).fold(0.0f64, |s, (a, b)| s.max((a - b).abs()));
    moved <= STALL_RELATIVE_MOVE * scale
}

fn certificate_of(
    state: &SolverState,
    shifted: bool,
    problem: &Problem,
    reg: &dyn Regularizer,
    rho: f64,
) -> DualCertificate {
    if shifted {
        let mut plain = state.clone();
        unshift(&mut plain.x, problem.cost(), rho);
        duality_gap(problem, reg, &plain, rho)
    } else {
        duality_gap(problem, reg, state, rho)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regularizer::{RegularizerKind, WeightedL1};
    use crate::GroupPartition;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(m: usize, n: usize, seed: u64) -> Problem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = Array2::from_shape_fn((m, n), |_| rng.random::<f64>());
        let p: Array1<f64> = Array1::from_shape_fn(m, |_| 0.2 + rng.random::<f64>());
        let q: Array1<f64> = Array1::from_shape_fn(n, |_| 0.2 + rng.random::<f64>());
        let (p, q) = (&p / p.sum(), &q / q.sum());
        Problem::new(c, p, q).unwrap().normalize_cost().0
    }

    fn diag2() -> Problem {
        Problem::new(array![[0.0, 1.0], [1.0, 0.0]], array![0.5, 0.5], array![0.5, 0.5]).unwrap()
    }

    #[test]
    fn stepsize_examples() {
        assert!((default_stepsize(2000, 3000) - 4e-4).abs() < 1e-18);
        assert_eq!(default_stepsize(1, 1), 1.0);
        assert!((default_stepsize(1000, 1000) - 1e-3).abs() < 1e-18);
    }

    #[test]
    fn init_examples() {
        let (x, phi, psi) = default_init(1000, 1000);
        assert_eq!(x.sum(), 0.0);
        assert!((phi[0] - 2.5e-4).abs() < 1e-18);
        assert!((psi[999] - 2.5e-4).abs() < 1e-18);
        let (_, phi, psi) = default_init(1, 1);
        assert_eq!((phi[0], psi[0]), (0.25, 0.25));
        let (_, phi, psi) = default_init(2, 3);
        assert!((phi[1] - 1.4 / 15.0).abs() < 1e-15);
        assert!((psi[2] - 1.6 / 15.0).abs() < 1e-15);
    }

    #[test]
    fn fixed_point_is_preserved() {
        let problem = Problem::new(array![[0.0]], array![1.0], array![1.0]).unwrap();
        let mut state = SolverState::new(&problem, array![[1.0]], array![0.0], array![0.0]).unwrap();
        let before = state.clone();
        step(&mut state, &problem, &RegularizerKind::Zero, 1.0).unwrap();
        assert_eq!(state.x, before.x);
        assert_eq!(state.phi, before.phi);
        assert_eq!(state.psi, before.psi);
        assert_eq!(state.r, array![0.0]);
        assert_eq!(state.k, 1);
    }

    #[test]
    fn diagonal_assignment() {
        let opts = SolverOptions {
            tol_primal: 1e-6,
            ..SolverOptions::default()
        };
        let report = solve(&diag2(), &RegularizerKind::Zero, &opts).unwrap();
        assert!(report.converged());
        let x = report.plan.entries();
        assert!((x[[0, 0]] - 0.5).abs() < 1e-6 && (x[[1, 1]] - 0.5).abs() < 1e-6);
        assert!(x[[0, 1]].abs() < 1e-6 && x[[1, 0]].abs() < 1e-6);
        assert!(report.objective.abs() < 1e-6);
    }

    #[test]
    fn singleton_problem_converges_quickly() {
        let problem = Problem::new(array![[0.7]], array![1.0], array![1.0]).unwrap();
        for reg in [
            RegularizerKind::Zero,
            RegularizerKind::quadratic(5.0).unwrap(),
            RegularizerKind::group_lasso(0.5, GroupPartition::whole(1, 1)).unwrap(),
            RegularizerKind::hypentropic(0.2).unwrap(),
        ] {
            let opts = SolverOptions {
                tol_primal: 1e-8,
                max_iter: 500,
                ..SolverOptions::default()
            };
            let report = solve(&problem, &reg, &opts).unwrap();
            assert!(report.converged(), "{reg}: {:?}", report.termination);
            assert!((report.plan.entries()[[0, 0]] - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn skip_count_examples() {
        let one = Problem::new(array![[1.0]], array![1.0], array![1.0]).unwrap();
        assert_eq!(compute_skip_count(&one, default_stepsize(1, 1)), 0);

        let n = 100;
        let uniform = Problem::new(
            Array2::ones((n, n)),
            Array1::from_elem(n, 1.0 / n as f64),
            Array1::from_elem(n, 1.0 / n as f64),
        )
        .unwrap();
        assert_eq!(compute_skip_count(&uniform, default_stepsize(n, n)), 16);

        let mut c = random_problem(5, 6, 3).cost().clone();
        c[[2, 3]] = 0.0;
        let with_zero = random_problem(5, 6, 3).with_cost(c).unwrap();
        assert_eq!(compute_skip_count(&with_zero, default_stepsize(5, 6)), 0);
    }

    #[test]
    fn product_init_produces_at_least_the_skip_count_of_zero_iterates() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let (m, n) = (rng.random_range(10..60), rng.random_range(10..60));
            let c = Array2::from_shape_fn((m, n), |_| 0.5 + 0.5 * rng.random::<f64>());
            let problem = Problem::new(c, Array1::from_elem(m, 1.0 / m as f64), Array1::from_elem(n, 1.0 / n as f64))
                .unwrap()
                .normalize_cost()
                .0;
            let rho = default_stepsize(m, n);
            let expected = compute_skip_count(&problem, rho);
            let mut state = SolverState::from_init(&problem, &Init::Product).unwrap();
            let mut zeros = 0;
            loop {
                step(&mut state, &problem, &RegularizerKind::Zero, rho).unwrap();
                if state.support > 0 {
                    break;
                }
                zeros += 1;
            }
            assert!(zeros >= expected, "{m}x{n}: {zeros} < {expected}");
        }
    }

    #[test]
    fn mass_balance_identity() {
        let problem = random_problem(6, 7, 1);
        let reg = RegularizerKind::quadratic(0.3).unwrap();
        let mut state = SolverState::from_init(&problem, &Init::SkipAhead).unwrap();
        for _ in 0..200 {
            step(&mut state, &problem, &reg, default_stepsize(6, 7)).unwrap();
            assert!((state.r.sum() - state.s.sum()).abs() <= 1e-10);
            assert!(state.x.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn fused_schedule_matches_reference() {
        let problem = random_problem(9, 13, 5);
        let groups = GroupPartition::column_class_blocks(13, &[0, 0, 0, 1, 1, 1, 2, 2, 2]);
        for reg in [
            RegularizerKind::Zero,
            RegularizerKind::quadratic(0.5).unwrap(),
            RegularizerKind::group_lasso(0.01, groups).unwrap(),
        ] {
            for max_iter in [200, 201] {
                let base = SolverOptions {
                    tol_primal: 1e-300,
                    max_iter,
                    ..SolverOptions::default()
                };
                let a = solve(&problem, &reg, &base).unwrap();
                let b = solve(&problem, &reg, &SolverOptions { fused: true, ..base }).unwrap();
                let diff = (a.plan.entries() - b.plan.entries()).mapv(f64::abs).fold(0.0f64, |x, &y| x.max(y));
                assert!(diff <= 1e-12, "{reg}: {diff}");
            }
        }
    }

    #[test]
    fn converges_on_random_problems() {
        for (seed, reg) in [
            (1, RegularizerKind::Zero),
            (2, RegularizerKind::quadratic(1.0).unwrap()),
            (
                3,
                RegularizerKind::group_lasso(1e-3, GroupPartition::column_class_blocks(20, &[0; 20].iter().enumerate().map(|(i, _)| i / 10).collect::<Vec<_>>())).unwrap(),
            ),
        ] {
            let problem = random_problem(20, 20, seed);
            let opts = SolverOptions {
                tol_primal: 1e-6,
                max_iter: 200_000,
                ..SolverOptions::default()
            };
            let report = solve(&problem, &reg, &opts).unwrap();
            assert!(report.converged(), "{reg}: {:?} after {}", report.termination, report.iterations);
        }
    }

    #[test]
    fn warm_start_at_convergence_is_stationary() {
        let problem = random_problem(8, 6, 9);
        let reg = RegularizerKind::WeightedL1(WeightedL1::uniform(8, 6, 0.05).unwrap());
        let opts = SolverOptions {
            tol_primal: 1e-13,
            max_iter: 500_000,
            ..SolverOptions::default()
        };
        let report = solve(&problem, &reg, &opts).unwrap();
        let st = report.state.unwrap();
        let mut warm = SolverState::new(&problem, st.x.clone(), st.phi.clone(), st.psi.clone()).unwrap();
        step(&mut warm, &problem, &reg, report.rho).unwrap();
        let diff = (&warm.x - &st.x).mapv(|v| v * v).sum().sqrt();
        assert!(diff <= 1e-10, "{diff}");
    }

    #[test]
    fn permuting_rows_permutes_the_plan() {
        let problem = random_problem(7, 5, 21);
        let perm = [3, 0, 6, 1, 5, 2, 4];
        let c = Array2::from_shape_fn((7, 5), |(i, j)| problem.cost()[[perm[i], j]]);
        let p = Array1::from_shape_fn(7, |i| problem.p()[perm[i]]);
        let permuted = Problem::new(c, p, problem.q().clone()).unwrap();
        let reg = RegularizerKind::quadratic(0.2).unwrap();
        let opts = SolverOptions {
            tol_primal: 1e-9,
            max_iter: 200_000,
            ..SolverOptions::default()
        };
        let a = solve(&problem, &reg, &opts).unwrap();
        let b = solve(&permuted, &reg, &opts).unwrap();
        for i in 0..7 {
            for j in 0..5 {
                assert!((a.plan.entries()[[perm[i], j]] - b.plan.entries()[[i, j]]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn error_paths() {
        let opts = SolverOptions {
            max_iter: 0,
            ..SolverOptions::default()
        };
        assert_eq!(solve(&diag2(), &RegularizerKind::Zero, &opts).unwrap_err(), Error::ZeroIterations);

        let mut state = SolverState::from_init(&diag2(), &Init::SkipAhead).unwrap();
        state.a[0] = f64::NAN;
        let err = step(&mut state, &diag2(), &RegularizerKind::Zero, 1.0).unwrap_err();
        assert!(matches!(err, Error::NonFiniteIterate { iteration: 1 }));

        let gl = RegularizerKind::group_lasso(1.0, GroupPartition::whole(3, 3)).unwrap();
        assert!(matches!(
            solve(&diag2(), &gl, &SolverOptions::default()).unwrap_err(),
            Error::DimensionMismatch(_)
        ));
    }

    #[test]
    fn converged_report_honours_tolerances() {
        let problem = random_problem(5, 5, 4);
        let opts = SolverOptions {
            tol_primal: 1e-7,
            tol_gap: Some(1e-7),
            record_trace: true,
            ..SolverOptions::default()
        };
        let report = solve(&problem, &RegularizerKind::Zero, &opts).unwrap();
        assert!(report.converged());
        let last = report.trace.last().unwrap();
        assert!(last.r_primal <= 1e-7);
        assert!(last.gap.unwrap().abs() <= 1e-7);
        assert!(last.dual_residual.unwrap() <= 1e-7);
        assert_eq!(report.trace.len(), report.iterations);
    }

    #[test]
    fn unreachable_tolerance_stalls_before_max_iter() {
        let problem = random_problem(3, 4, 9);
        let opts = SolverOptions {
            tol_primal: 1e-300,
            max_iter: 10 * STALL_WINDOW,
            ..SolverOptions::default()
        };
        let report = solve(&problem, &RegularizerKind::Zero, &opts).unwrap();
        assert!(report.termination != Termination::MaxIter, "{:?}", report.termination);
        assert!(report.iterations < opts.max_iter);
    }
}
