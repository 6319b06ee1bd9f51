//! Sparsity promoting regularizers.
//!
//! A regularizer `h` is sparsity promoting when zeroing entries of `X` never
//! increases `h(X)`. For such `h` the prox maps zeros to zeros and keeps
//! non-negative inputs non-negative, which is what lets the solver apply it
//! directly after the clamp `[Y - rho C]_+`.
//!
//! Besides the value and the prox, each instance contributes its share of the
//! duality gap and the dual residual. Both are evaluated on the slack
//! `U = [X_bar - X]_+`, where `X_bar = [X + phi 1^T + 1 psi^T - rho C]_+` is the
//! clamped point of the next iteration. `U` equals `[phi 1^T + 1 psi^T - rho C]_+`
//! because `X >= 0`.

use std::fmt;

use ndarray::{Array2, Zip};
use rayon::prelude::*;

use crate::problem::{GroupPartition, NO_GROUP};
use crate::reduce::{PAR_THRESHOLD, ROW_CHUNK};
use crate::{Error, Result};

/// Behavioral interface for the regularizer `h`.
pub trait Regularizer: Send + Sync + fmt::Debug {
    /// `h(X)`; `+inf` is a legal value.
    fn value(&self, x: &Array2<f64>) -> f64;

    /// Replaces `v` by `prox_{rho h}(v) = argmin_Z h(Z) + ||Z - v||^2 / (2 rho)`.
    fn prox_in_place(&self, v: &mut Array2<f64>, rho: f64) -> Result<()>;

    /// Out-of-place prox.
    fn prox(&self, v: &Array2<f64>, rho: f64) -> Result<Array2<f64>> {
        let mut out = v.clone();
        self.prox_in_place(&mut out, rho)?;
        Ok(out)
    }

    /// Whether the prox acts on each row independently, in which case the
    /// solver fuses it into its sweep through [`Regularizer::prox_row`].
    fn is_row_separable(&self) -> bool {
        false
    }

    /// Prox of row `i` alone. Only meaningful when [`Regularizer::is_row_separable`].
    fn prox_row(&self, _i: usize, _row: &mut [f64], _rho: f64) -> Result<()> {
        Err(Error::invalid("prox_row", "regularizer is not row separable"))
    }

    /// Finite part of `h^*(U / rho)` with `U = [x_bar - x]_+`.
    fn conjugate_gap_term(&self, x: &Array2<f64>, x_bar: &Array2<f64>, rho: f64) -> f64;

    /// Violation of the dual constraints implied by `dom h^*`, scaled by `rho`
    /// like the primal iterates.
    fn dual_residual(&self, x: &Array2<f64>, x_bar: &Array2<f64>, rho: f64) -> f64;

    /// Rejects regularizers whose data does not fit an m x n plan.
    fn check_dims(&self, _m: usize, _n: usize) -> Result<()> {
        Ok(())
    }
}

/// `[x_bar - x]_+`.
pub fn slack(x: &Array2<f64>, x_bar: &Array2<f64>) -> Array2<f64> {
    Zip::from(x_bar).and(x).map_collect(|&b, &a| (b - a).max(0.0))
}

fn frobenius(x: &Array2<f64>) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Runs `prox_row` over all rows, in parallel for large matrices.
fn prox_by_rows<R: Regularizer + ?Sized>(reg: &R, v: &mut Array2<f64>, rho: f64) -> Result<()> {
    let n = v.ncols();
    if n == 0 {
        return Ok(());
    }
    let len = v.len();
    let data = v.as_slice_mut().expect("plans are stored in standard layout");
    let run_chunk = |(c, chunk): (usize, &mut [f64])| -> Result<()> {
        for (k, row) in chunk.chunks_mut(n).enumerate() {
            reg.prox_row(c * ROW_CHUNK + k, row, rho)?;
        }
        Ok(())
    };
    if len >= PAR_THRESHOLD {
        data.par_chunks_mut(ROW_CHUNK * n).enumerate().try_for_each(run_chunk)
    } else {
        data.chunks_mut(ROW_CHUNK * n).enumerate().try_for_each(run_chunk)
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("rho", format!("must be positive and finite, got {rho}")))
    }
}

fn positive(name: &'static str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::invalid(name, format!("must be positive and finite, got {v}")))
    }
}

/// `h = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Zero;

impl Regularizer for Zero {
    fn value(&self, _x: &Array2<f64>) -> f64 {
        0.0
    }

    fn prox_in_place(&self, _v: &mut Array2<f64>, rho: f64) -> Result<()> {
        check_rho(rho)
    }

    fn is_row_separable(&self) -> bool {
        true
    }

    fn prox_row(&self, _i: usize, _row: &mut [f64], _rho: f64) -> Result<()> {
        Ok(())
    }

    fn conjugate_gap_term(&self, _x: &Array2<f64>, _x_bar: &Array2<f64>, _rho: f64) -> f64 {
        0.0
    }

    fn dual_residual(&self, x: &Array2<f64>, x_bar: &Array2<f64>, _rho: f64) -> f64 {
        frobenius(&slack(x, x_bar))
    }
}

/// `h(X) = (alpha / 2) ||X||_F^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic {
    alpha: f64,
}

impl Quadratic {
    pub fn new(alpha: f64) -> Result<Self> {
        Ok(Quadratic {
            alpha: positive("alpha", alpha)?,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl Regularizer for Quadratic {
    fn value(&self, x: &Array2<f64>) -> f64 {
        0.5 * self.alpha * x.iter().map(|v| v * v).sum::<f64>()
    }

    fn prox_in_place(&self, v: &mut Array2<f64>, rho: f64) -> Result<()> {
        check_rho(rho)?;
        prox_by_rows(self, v, rho)
    }

    fn is_row_separable(&self) -> bool {
        true
    }

    fn prox_row(&self, _i: usize, row: &mut [f64], rho: f64) -> Result<()> {
        let shrink = 1.0 / (1.0 + rho * self.alpha);
        row.iter_mut().for_each(|v| *v *= shrink);
        Ok(())
    }

    /// `h^*(U) = ||U||^2 / (2 alpha)`.
    fn conjugate_gap_term(&self, x: &Array2<f64>, x_bar: &Array2<f64>, rho: f64) -> f64 {
        let u = slack(x, x_bar);
        u.iter().map(|v| v * v).sum::<f64>() / (2.0 * self.alpha * rho * rho)
    }

    fn dual_residual(&self, _x: &Array2<f64>, _x_bar: &Array2<f64>, _rho: f64) -> f64 {
        0.0
    }
}

/// `h(X) = lambda * sum_g ||X_g||_F` over disjoint groups.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupLasso {
    lambda: f64,
    groups: GroupPartition,
}

impl GroupLasso {
    pub fn new(lambda: f64, groups: GroupPartition) -> Result<Self> {
        Ok(GroupLasso {
            lambda: positive("lambda", lambda)?,
            groups,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn groups(&self) -> &GroupPartition {
        &self.groups
    }

    fn group_norms(&self, data: &[f64]) -> Vec<f64> {
        let norm = |g: &Vec<usize>| g.iter().map(|&k| data[k] * data[k]).sum::<f64>().sqrt();
        if data.len() >= PAR_THRESHOLD {
            self.groups.groups().par_iter().map(norm).collect()
        } else {
            self.groups.groups().iter().map(norm).collect()
        }
    }
}

impl Regularizer for GroupLasso {
    fn value(&self, x: &Array2<f64>) -> f64 {
        let data = x.as_slice().expect("standard layout");
        self.lambda * self.group_norms(data).iter().sum::<f64>()
    }

    /// Block soft-thresholding with threshold `rho * lambda`.
    fn prox_in_place(&self, v: &mut Array2<f64>, rho: f64) -> Result<()> {
        check_rho(rho)?;
        self.check_dims(v.nrows(), v.ncols())?;
        let threshold = rho * self.lambda;
        let data = v.as_slice_mut().expect("standard layout");
        let scales: Vec<f64> = self
            .group_norms(data)
            .into_iter()
            .map(|norm| if norm > threshold { 1.0 - threshold / norm } else { 0.0 })
            .collect();
        let membership = self.groups.membership();
        let apply = |(x, &g): (&mut f64, &u32)| {
            if g != NO_GROUP {
                *x *= scales[g as usize];
            }
        };
        if data.len() >= PAR_THRESHOLD {
            data.par_iter_mut().zip(membership.par_iter()).for_each(apply);
        } else {
            data.iter_mut().zip(membership.iter()).for_each(apply);
        }
        Ok(())
    }

    /// `h^*` is the indicator of `{||U_g|| <= lambda}`; its violation goes to the dual residual.
    fn conjugate_gap_term(&self, _x: &Array2<f64>, _x_bar: &Array2<f64>, _rho: f64) -> f64 {
        0.0
    }

    /// `||prox_{rho h}(U)||_F`, i.e. `rho` times the distance of `U / rho` to the dual ball.
    fn dual_residual(&self, x: &Array2<f64>, x_bar: &Array2<f64>, rho: f64) -> f64 {
        let mut u = slack(x, x_bar);
        // Entries outside every group face the h = 0 constraint U <= 0.
        self.prox_in_place(&mut u, rho).map(|_| frobenius(&u)).unwrap_or(f64::INFINITY)
    }

    fn check_dims(&self, m: usize, n: usize) -> Result<()> {
        if self.groups.dim() != (m, n) {
            return Err(Error::DimensionMismatch(format!(
                "group partition is {:?}, plan is {m}x{n}",
                self.groups.dim()
            )));
        }
        Ok(())
    }
}

/// `h(X) = sum_ij w_ij |X_ij|` with `w >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedL1 {
    weights: Array2<f64>,
}

impl WeightedL1 {
    pub fn new(weights: Array2<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("weights", "entries must be finite and non-negative"));
        }
        Ok(WeightedL1 {
            weights: weights.as_standard_layout().to_owned(),
        })
    }

    /// Same weight on every entry.
    pub fn uniform(m: usize, n: usize, w: f64) -> Result<Self> {
        WeightedL1::new(Array2::from_elem((m, n), w))
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }
}

impl Regularizer for WeightedL1 {
    fn value(&self, x: &Array2<f64>) -> f64 {
        Zip::from(x).and(&self.weights).fold(0.0, |acc, &v, &w| acc + w * v.abs())
    }

    fn prox_in_place(&self, v: &mut Array2<f64>, rho: f64) -> Result<()> {
        check_rho(rho)?;
        self.check_dims(v.nrows(), v.ncols())?;
        prox_by_rows(self, v, rho)
    }

    fn is_row_separable(&self) -> bool {
        true
    }

    fn prox_row(&self, i: usize, row: &mut [f64], rho: f64) -> Result<()> {
        let w = self.weights.row(i);
        for (v, &w) in row.iter_mut().zip(w.iter()) {
            let t = rho * w;
            *v = v.signum() * (v.abs() - t).max(0.0);
        }
        Ok(())
    }

    fn conjugate_gap_term(&self, _x: &Array2<f64>, _x_bar: &Array2<f64>, _rho: f64) -> f64 {
        0.0
    }

    fn dual_residual(&self, x: &Array2<f64>, x_bar: &Array2<f64>, rho: f64) -> f64 {
        let u = slack(x, x_bar);
        Zip::from(&u)
            .and(&self.weights)
            .fold(0.0, |acc, &u, &w| acc + (u - rho * w).max(0.0).powi(2))
            .sqrt()
    }

    fn check_dims(&self, m: usize, n: usize) -> Result<()> {
        if self.weights.dim() != (m, n) {
            return Err(Error::DimensionMismatch(format!(
                "weights are {:?}, plan is {m}x{n}",
                self.weights.dim()
            )));
        }
        Ok(())
    }
}

/// Indicator of `X_ij = 0` for every `(i, j)` in a forbidden set `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct Forbidden {
    mask: Array2<bool>,
}

impl Forbidden {
    pub fn new(m: usize, n: usize, entries: &[(usize, usize)]) -> Result<Self> {
        let mut mask = Array2::from_elem((m, n), false);
        for &(i, j) in entries {
            if i >= m || j >= n {
                return Err(Error::invalid("forbidden", format!("({i},{j}) is outside the {m}x{n} grid")));
            }
            mask[[i, j]] = true;
        }
        Ok(Forbidden { mask })
    }

    pub fn mask(&self) -> &Array2<bool> {
        &self.mask
    }
}

impl Regularizer for Forbidden {
    fn value(&self, x: &Array2<f64>) -> f64 {
        let violated = Zip::from(x).and(&self.mask).fold(false, |acc, &v, &s| acc || (s && v != 0.0));
        if violated {
            f64::INFINITY
        } else {
            0.0
        }
    }

    fn prox_in_place(&self, v: &mut Array2<f64>, rho: f64) -> Result<()> {
        check_rho(rho)?;
        self.check_dims(v.nrows(), v.ncols())?;
        prox_by_rows(self, v, rho)
    }

    fn is_row_separable(&self) -> bool {
        true
    }

    fn prox_row(&self, i: usize, row: &mut [f64], _rho: f64) -> Result<()> {
        for (v, &s) in row.iter_mut().zip(self.mask.row(i).iter()) {
            if s {
                *v = 0.0;
            }
        }
        Ok(())
    }

    fn conjugate_gap_term(&self, _x: &Array2<f64>, _x_bar: &Array2<f64>, _rho: f64) -> f64 {
        0.0
    }

    /// Slack on allowed entries; the forbidden ones carry no dual constraint.
    fn dual_residual(&self, x: &Array2<f64>, x_bar: &Array2<f64>, _rho: f64) -> f64 {
        let u = slack(x, x_bar);
        Zip::from(&u)
            .and(&self.mask)
            .fold(0.0, |acc, &u, &s| if s { acc } else { acc + u * u })
            .sqrt()
    }

    fn check_dims(&self, m: usize, n: usize) -> Result<()> {
        if self.mask.dim() != (m, n) {
            return Err(Error::DimensionMismatch(format!(
                "forbidden mask is {:?}, plan is {m}x{n}",
                self.mask.dim()
            )));
        }
        Ok(())
    }
}

/// `h(X) = sum_ij X_ij asinh(X_ij / beta) - sqrt(X_ij^2 + beta^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hypentropic {
    beta: f64,
}

/// Iteration cap of the scalar root-find in the hypentropic prox.
pub const HYPENTROPIC_MAX_ITER: usize = 100;

impl Hypentropic {
    pub fn new(beta: f64) -> Result<Self> {
        Ok(Hypentropic {
            beta: positive("beta", beta)?,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Solves `rho asinh(z / beta) + z = v` by Newton's method, falling back
    /// to bisection whenever a step leaves the bracket `[0, |v|]`.
    pub fn prox_scalar(&self, v: f64, rho: f64) -> Result<f64> {
        if v == 0.0 {
            return Ok(0.0);
        }
        let target = v.abs();
        let beta = self.beta;
        let g = |z: f64| rho * (z / beta).asinh() + z - target;
        let (mut lo, mut hi) = (0.0, target);
        let mut z = target / (1.0 + rho / beta);
        let tol = 1e-12 * target.max(1.0);
        for _ in 0..HYPENTROPIC_MAX_ITER {
            let gz = g(z);
            if gz.abs() <= tol {
                return Ok(v.signum() * z);
            }
            if gz > 0.0 {
                hi = z;
            } else {
                lo = z;
            }
            let slope = 1.0 + rho / (z * z + beta * beta).sqrt();
            let newton = z - gz / slope;
            z = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= tol {
                return Ok(v.signum() * z);
            }
        }
        Err(Error::NoConvergence("hypentropic prox"))
    }
}

impl Regularizer for Hypentropic {
    fn value(&self, x: &Array2<f64>) -> f64 {
        let b = self.beta;
        x.iter().map(|&v| v * (v / b).asinh() - (v * v + b * b).sqrt()).sum()
    }

    fn prox_in_place(&self, v: &mut Array2<f64>, rho: f64) -> Result<()> {
        check_rho(rho)?;
        prox_by_rows(self, v, rho)
    }

    fn is_row_separable(&self) -> bool {
        true
    }

    fn prox_row(&self, _i: usize, row: &mut [f64], rho: f64) -> Result<()> {
        for v in row.iter_mut() {
            *v = self.prox_scalar(*v, rho)?;
        }
        Ok(())
    }

    /// `h^*(U) = beta * sum cosh(U_ij)`.
    fn conjugate_gap_term(&self, x: &Array2<f64>, x_bar: &Array2<f64>, rho: f64) -> f64 {
        slack(x, x_bar).iter().map(|u| self.beta * (u / rho).cosh()).sum()
    }

    fn dual_residual(&self, _x: &Array2<f64>, _x_bar: &Array2<f64>, _rho: f64) -> f64 {
        0.0
    }
}

/// The regularizer family handled by the solver, with parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum RegularizerKind {
    Zero,
    Quadratic(Quadratic),
    GroupLasso(GroupLasso),
    WeightedL1(WeightedL1),
    Forbidden(Forbidden),
    Hypentropic(Hypentropic),
}

impl RegularizerKind {
    pub fn quadratic(alpha: f64) -> Result<Self> {
        Quadratic::new(alpha).map(RegularizerKind::Quadratic)
    }

    pub fn group_lasso(lambda: f64, groups: GroupPartition) -> Result<Self> {
        GroupLasso::new(lambda, groups).map(RegularizerKind::GroupLasso)
    }

    pub fn hypentropic(beta: f64) -> Result<Self> {
        Hypentropic::new(beta).map(RegularizerKind::Hypentropic)
    }

    fn inner(&self) -> &dyn Regularizer {
        match self {
            RegularizerKind::Zero => &Zero,
            RegularizerKind::Quadratic(r) => r,
            RegularizerKind::GroupLasso(r) => r,
            RegularizerKind::WeightedL1(r) => r,
            RegularizerKind::Forbidden(r) => r,
            RegularizerKind::Hypentropic(r) => r,
        }
    }
}

impl fmt::Display for RegularizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegularizerKind::Zero => write!(f, "none"),
            RegularizerKind::Quadratic(q) => write!(f, "quad:alpha={}", q.alpha),
            RegularizerKind::GroupLasso(g) => write!(f, "gl:lambda={}", g.lambda),
            RegularizerKind::WeightedL1(_) => write!(f, "wl1"),
            RegularizerKind::Forbidden(_) => write!(f, "forbid"),
            RegularizerKind::Hypentropic(h) => write!(f, "hypent:beta={}", h.beta),
        }
    }
}

impl Regularizer for RegularizerKind {
    fn value(&self, x: &Array2<f64>) -> f64 {
        self.inner().value(x)
    }

    fn prox_in_place(&self, v: &mut Array2<f64>, rho: f64) -> Result<()> {
        self.inner().prox_in_place(v, rho)
    }

    fn is_row_separable(&self) -> bool {
        self.inner().is_row_separable()
    }

    fn prox_row(&self, i: usize, row: &mut [f64], rho: f64) -> Result<()> {
        self.inner().prox_row(i, row, rho)
    }

    fn conjugate_gap_term(&self, x: &Array2<f64>, x_bar: &Array2<f64>, rho: f64) -> f64 {
        self.inner().conjugate_gap_term(x, x_bar, rho)
    }

    fn dual_residual(&self, x: &Array2<f64>, x_bar: &Array2<f64>, rho: f64) -> f64 {
        self.inner().dual_residual(x, x_bar, rho)
    }

    fn check_dims(&self, m: usize, n: usize) -> Result<()> {
        self.inner().check_dims(m, n)
    }
}
