//! Entropic OT baselines: Sinkhorn-Knopp and its log-domain variant.
//!
//! Both solve `min <C, X> + eps sum X_ij log X_ij` over the transport polytope by
//! alternately rescaling the rows and columns of `K = exp(-C / eps)`. The
//! plain variant underflows once `C / eps` reaches roughly 745; the log-domain
//! variant works with potentials `f`, `g` and log-sum-exp reductions instead.

use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rayon::prelude::*;

use crate::problem::{marginal_errors, Problem, TransportPlan};
use crate::reduce::PAR_THRESHOLD;
use crate::solver::{SolveReport, Termination, TraceRecord};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornOptions {
    pub epsilon: f64,
    pub max_iter: usize,
    /// Stop once `max(||X 1 - p||_2, ||X^T 1 - q||_2)` is at most this.
    pub tol: f64,
    pub check_every: usize,
    pub log_domain: bool,
    pub record_trace: bool,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        SinkhornOptions {
            epsilon: 1e-1,
            max_iter: 100_000,
            tol: 1e-4,
            check_every: 10,
            log_domain: false,
            record_trace: false,
        }
    }
}

impl SinkhornOptions {
    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid("epsilon", format!("must be positive, got {}", self.epsilon)));
        }
        if self.max_iter == 0 {
            return Err(Error::ZeroIterations);
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol", "must be positive"));
        }
        if self.check_every == 0 {
            return Err(Error::invalid("check_every", "must be at least 1"));
        }
        Ok(())
    }
}

/// `(||X 1 - p||_2, ||X^T 1 - q||_2)`.
pub fn sinkhorn_plan_marginal_error(plan: &Array2<f64>, p: ArrayView1<f64>, q: ArrayView1<f64>) -> (f64, f64) {
    marginal_errors(plan, p, q)
}

/// Entropic OT by alternating scaling.
///
/// Atoms with zero mass are removed before scaling and reinserted as zero
/// rows or columns of the plan. The report's `objective` is the linear cost
/// `<C, X>` without the entropy term, `rho` holds `epsilon`, and the trace has
/// no gap or dual residual.
pub fn sinkhorn(problem: &Problem, options: &SinkhornOptions) -> Result<SolveReport> {
    options.validate()?;
    let started = Instant::now();
    let rows: Vec<usize> = (0..problem.rows()).filter(|&i| problem.p()[i] > 0.0).collect();
    let cols: Vec<usize> = (0..problem.cols()).filter(|&j| problem.q()[j] > 0.0).collect();
    let cost = Array2::from_shape_fn((rows.len(), cols.len()), |(a, b)| problem.cost()[[rows[a], cols[b]]]);
    let p = Array1::from_iter(rows.iter().map(|&i| problem.p()[i]));
    let q = Array1::from_iter(cols.iter().map(|&j| problem.q()[j]));

    let mut run = if options.log_domain {
        Run::Log(LogRun::new(&cost, &p, &q, options.epsilon))
    } else {
        Run::Plain(PlainRun::new(&cost, &p, &q, options.epsilon)?)
    };

    let mut trace = Vec::new();
    let mut termination = Termination::MaxIter;
    let mut iterations = 0;
    let mut r_primal = f64::INFINITY;
    for k in 1..=options.max_iter {
        run.sweep()?;
        iterations = k;
        if k % options.check_every != 0 && k != options.max_iter {
            continue;
        }
        let plan = run.plan();
        let (er, ec) = marginal_errors(&plan, p.view(), q.view());
        r_primal = er.max(ec);
        if options.record_trace {
            trace.push(TraceRecord {
                iter: k,
                r_primal,
                gap: None,
                dual_residual: None,
                support: plan.iter().filter(|&&v| v > 0.0).count(),
                elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
            });
        }
        if r_primal <= options.tol {
            termination = Termination::Converged;
            break;
        }
    }

    let small = run.plan();
    let mut full = Array2::zeros(problem.dim());
    for (a, &i) in rows.iter().enumerate() {
        for (b, &j) in cols.iter().enumerate() {
            full[[i, j]] = small[[a, b]];
        }
    }
    let objective = problem.linear_cost(&full);
    Ok(SolveReport {
        plan: TransportPlan::new(full),
        objective,
        iterations,
        termination,
        r_primal,
        trace,
        rho: options.epsilon,
        state: None,
    })
}

enum Run {
    Plain(PlainRun),
    Log(LogRun),
}

impl Run {
    fn sweep(&mut self) -> Result<()> {
        match self {
            Run::Plain(r) => r.sweep(),
            Run::Log(r) => {
                r.sweep();
                Ok(())
            }
        }
    }

    fn plan(&self) -> Array2<f64> {
        match self {
            Run::Plain(r) => r.plan(),
            Run::Log(r) => r.plan(),
        }
    }
}

/// Row-wise map over a matrix, parallel on large inputs. Each output entry is
/// computed sequentially, so the result does not depend on the thread count.
fn map_rows(mat: &Array2<f64>, f: impl Fn(usize, ArrayView1<f64>) -> f64 + Sync) -> Array1<f64> {
    if mat.len() >= PAR_THRESHOLD {
        let rows: Vec<f64> = (0..mat.nrows()).into_par_iter().map(|i| f(i, mat.row(i))).collect();
        Array1::from(rows)
    } else {
        Array1::from_iter((0..mat.nrows()).map(|i| f(i, mat.row(i))))
    }
}

struct PlainRun {
    k: Array2<f64>,
    kt: Array2<f64>,
    p: Array1<f64>,
    q: Array1<f64>,
    u: Array1<f64>,
    v: Array1<f64>,
}

impl PlainRun {
    fn new(cost: &Array2<f64>, p: &Array1<f64>, q: &Array1<f64>, eps: f64) -> Result<Self> {
        let k = cost.mapv(|c| (-c / eps).exp());
        let empty_line = |m: &Array2<f64>| m.axis_iter(Axis(0)).any(|r| r.iter().all(|&x| x == 0.0));
        let kt = k.t().as_standard_layout().to_owned();
        if empty_line(&k) || empty_line(&kt) {
            return Err(Error::NumericalUnderflow);
        }
        Ok(PlainRun {
            u: Array1::ones(p.len()),
            v: Array1::ones(q.len()),
            k,
            kt,
            p: p.clone(),
            q: q.clone(),
        })
    }

    fn sweep(&mut self) -> Result<()> {
        let kv = map_rows(&self.k, |_, row| row.dot(&self.v));
        self.u = &self.p / &kv;
        let ktu = map_rows(&self.kt, |_, row| row.dot(&self.u));
        self.v = &self.q / &ktu;
        if self.u.iter().chain(self.v.iter()).any(|x| !x.is_finite() || *x == 0.0) {
            return Err(Error::NumericalUnderflow);
        }
        Ok(())
    }

    fn plan(&self) -> Array2<f64> {
        let mut x = self.k.clone();
        for ((i, j), v) in x.indexed_iter_mut() {
            *v *= self.u[i] * self.v[j];
        }
        x
    }
}

struct LogRun {
    cost: Array2<f64>,
    cost_t: Array2<f64>,
    log_p: Array1<f64>,
    log_q: Array1<f64>,
    f: Array1<f64>,
    g: Array1<f64>,
    eps: f64,
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

impl LogRun {
    fn new(cost: &Array2<f64>, p: &Array1<f64>, q: &Array1<f64>, eps: f64) -> Self {
        LogRun {
            cost: cost.clone(),
            cost_t: cost.t().as_standard_layout().to_owned(),
            log_p: p.mapv(f64::ln),
            log_q: q.mapv(f64::ln),
            f: Array1::zeros(p.len()),
            g: Array1::zeros(q.len()),
            eps,
        }
    }

    fn sweep(&mut self) {
        let eps = self.eps;
        let g = &self.g;
        let log_p = &self.log_p;
        self.f = map_rows(&self.cost, |i, c| {
            eps * log_p[i] - eps * log_sum_exp(c.iter().zip(g.iter()).map(|(&c, &g)| (g - c) / eps))
        });
        let f = &self.f;
        let log_q = &self.log_q;
        self.g = map_rows(&self.cost_t, |j, c| {
            eps * log_q[j] - eps * log_sum_exp(c.iter().zip(f.iter()).map(|(&c, &f)| (f - c) / eps))
        });
    }

    fn plan(&self) -> Array2<f64> {
        Array2::from_shape_fn(self.cost.dim(), |(i, j)| {
            ((self.f[i] + self.g[j] - self.cost[[i, j]]) / self.eps).exp()
        })
    }
}
