//! Problem data, validation and cost normalization.

use std::collections::HashSet;

use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::regularizer::Regularizer;
use crate::{Error, Result};

/// Marginal sums within this distance of 1 are renormalized, others rejected.
pub const MARGINAL_SUM_TOLERANCE: f64 = 1e-6;

/// A validated transport problem: cost `C` (m x n) and marginals `p`, `q`.
///
/// Entries of `C`, `p` and `q` are finite and non-negative, and both
/// marginals sum to one up to 1e-12. Zero-mass atoms are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    cost: Array2<f64>,
    p: Array1<f64>,
    q: Array1<f64>,
}

/// Outcome of [`Problem::normalize_cost`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CostScale {
    /// The cost was divided by this (positive) maximum entry.
    Scaled(f64),
    /// Every cost entry is zero; the problem was returned unchanged.
    AllZero,
}

impl CostScale {
    /// Factor that maps normalized cost values back to the original units.
    pub fn factor(self) -> f64 {
        match self {
            CostScale::Scaled(s) => s,
            CostScale::AllZero => 1.0,
        }
    }
}

impl Problem {
    /// Validates `cost`, `p` and `q` and renormalizes marginals whose sums are
    /// within [`MARGINAL_SUM_TOLERANCE`] of one.
    pub fn new(cost: Array2<f64>, p: Array1<f64>, q: Array1<f64>) -> Result<Self> {
        let (m, n) = cost.dim();
        if m == 0 || n == 0 {
            return Err(Error::DimensionMismatch(format!(
                "cost must be at least 1x1, got {m}x{n}"
            )));
        }
        if p.len() != m || q.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "cost is {m}x{n} but p has {} and q has {} entries",
                p.len(),
                q.len()
            )));
        }
        check_entries("cost", cost.indexed_iter().map(|((i, j), &v)| (format!("({i},{j})"), v)))?;
        check_entries("p", p.iter().enumerate().map(|(i, &v)| (i.to_string(), v)))?;
        check_entries("q", q.iter().enumerate().map(|(j, &v)| (j.to_string(), v)))?;
        let p = renormalize("p", p)?;
        let q = renormalize("q", q)?;
        Ok(Problem { cost, p, q })
    }

    pub fn cost(&self) -> &Array2<f64> {
        &self.cost
    }

    pub fn p(&self) -> &Array1<f64> {
        &self.p
    }

    pub fn q(&self) -> &Array1<f64> {
        &self.q
    }

    pub fn rows(&self) -> usize {
        self.cost.nrows()
    }

    pub fn cols(&self) -> usize {
        self.cost.ncols()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.cost.dim()
    }

    /// Divides the cost by its largest entry so that `max C_ij = 1`.
    ///
    /// The argmin of the unregularized problem is unchanged. An all-zero cost
    /// is legal and is returned as is, flagged with [`CostScale::AllZero`].
    pub fn normalize_cost(&self) -> (Problem, CostScale) {
        let max = self.cost.iter().copied().fold(0.0_f64, f64::max);
        if max == 0.0 {
            return (self.clone(), CostScale::AllZero);
        }
        let cost = self.cost.mapv(|c| c / max);
        (
            Problem {
                cost,
                p: self.p.clone(),
                q: self.q.clone(),
            },
            CostScale::Scaled(max),
        )
    }

    /// Same problem with a replaced cost matrix (validated).
    pub fn with_cost(&self, cost: Array2<f64>) -> Result<Problem> {
        Problem::new(cost, self.p.clone(), self.q.clone())
    }

    /// `<C, X> + h(X)`.
    pub fn primal_objective(&self, plan: &Array2<f64>, reg: &dyn Regularizer) -> Result<f64> {
        if plan.dim() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "plan is {:?}, problem is {:?}",
                plan.dim(),
                self.dim()
            )));
        }
        Ok(self.linear_cost(plan) + reg.value(plan))
    }

    /// `<C, X>` summed row by row in a fixed order.
    pub fn linear_cost(&self, plan: &Array2<f64>) -> f64 {
        let per_row: Vec<f64> = self
            .cost
            .outer_iter()
            .zip(plan.outer_iter())
            .map(|(c, x)| c.iter().zip(x.iter()).map(|(a, b)| a * b).sum())
            .collect();
        crate::reduce::pairwise_sum(&per_row)
    }
}

fn check_entries(what: &'static str, entries: impl Iterator<Item = (String, f64)>) -> Result<()> {
    for (index, value) in entries {
        if !value.is_finite() {
            return Err(Error::NonFiniteInput(what));
        }
        if value < 0.0 {
            return Err(Error::NegativeEntry { what, index, value });
        }
    }
    Ok(())
}

fn renormalize(which: &'static str, v: Array1<f64>) -> Result<Array1<f64>> {
    let sum = crate::reduce::pairwise_sum(v.as_slice().expect("owned vector is contiguous"));
    if (sum - 1.0).abs() > MARGINAL_SUM_TOLERANCE {
        return Err(Error::MarginalSumOutOfRange { which, sum });
    }
    // Already-normalized input is left untouched so that validation is idempotent.
    if (sum - 1.0).abs() <= 1e-12 {
        return Ok(v);
    }
    Ok(v / sum)
}

/// A transport plan `X` (non-negative m x n).
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan(Array2<f64>);

impl TransportPlan {
    pub fn new(entries: Array2<f64>) -> Self {
        TransportPlan(entries)
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    /// `(||X 1 - p||_2, ||X^T 1 - q||_2)`.
    pub fn marginal_errors(&self, p: ArrayView1<f64>, q: ArrayView1<f64>) -> (f64, f64) {
        marginal_errors(&self.0, p, q)
    }

    /// Number of strictly positive entries.
    pub fn support_size(&self) -> usize {
        self.0.iter().filter(|&&x| x > 0.0).count()
    }
}

pub(crate) fn marginal_errors(x: &Array2<f64>, p: ArrayView1<f64>, q: ArrayView1<f64>) -> (f64, f64) {
    let rows = x.sum_axis(Axis(1));
    let cols = x.sum_axis(Axis(0));
    let er: f64 = rows.iter().zip(p.iter()).map(|(a, b)| (a - b).powi(2)).sum();
    let ec: f64 = cols.iter().zip(q.iter()).map(|(a, b)| (a - b).powi(2)).sum();
    (er.sqrt(), ec.sqrt())
}

/// Sentinel in [`GroupPartition::membership`] for entries outside every group.
pub const NO_GROUP: u32 = u32::MAX;

/// Disjoint groups of entries of an m x n grid (the group lasso's index sets).
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPartition {
    m: usize,
    n: usize,
    labels: Vec<String>,
    /// Flattened row-major indices per group.
    groups: Vec<Vec<usize>>,
    membership: Vec<u32>,
}

impl GroupPartition {
    /// Builds a partition from explicit `(row, col)` lists. Groups must be
    /// pairwise disjoint and inside the grid; entries may belong to no group.
    pub fn new(m: usize, n: usize, groups: Vec<(String, Vec<(usize, usize)>)>) -> Result<Self> {
        if groups.len() >= NO_GROUP as usize {
            return Err(Error::InvalidGroups("too many groups".into()));
        }
        let mut membership = vec![NO_GROUP; m * n];
        let mut labels = Vec::with_capacity(groups.len());
        let mut flat_groups = Vec::with_capacity(groups.len());
        let mut seen_labels = HashSet::new();
        for (g, (label, entries)) in groups.into_iter().enumerate() {
            if !seen_labels.insert(label.clone()) {
                return Err(Error::InvalidGroups(format!("duplicate group id {label}")));
            }
            let mut flat = Vec::with_capacity(entries.len());
            for (i, j) in entries {
                if i >= m || j >= n {
                    return Err(Error::InvalidGroups(format!(
                        "entry ({i},{j}) of group {label} is outside the {m}x{n} grid"
                    )));
                }
                let idx = i * n + j;
                if membership[idx] != NO_GROUP {
                    return Err(Error::InvalidGroups(format!(
                        "entry ({i},{j}) appears in more than one group"
                    )));
                }
                membership[idx] = g as u32;
                flat.push(idx);
            }
            labels.push(label);
            flat_groups.push(flat);
        }
        Ok(GroupPartition {
            m,
            n,
            labels,
            groups: flat_groups,
            membership,
        })
    }

    /// A single group holding the whole grid.
    pub fn whole(m: usize, n: usize) -> Self {
        let entries = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
        GroupPartition::new(m, n, vec![("all".into(), entries)]).expect("whole grid is a valid partition")
    }

    /// One group per (column, row class): the rows sharing a source label,
    /// restricted to one target column. Groups are ordered column-major and
    /// by class id within a column.
    pub fn column_class_blocks(n: usize, row_labels: &[usize]) -> Self {
        let m = row_labels.len();
        let classes = row_labels.iter().copied().max().map_or(0, |c| c + 1);
        let mut rows_of: Vec<Vec<usize>> = vec![Vec::new(); classes];
        for (i, &c) in row_labels.iter().enumerate() {
            rows_of[c].push(i);
        }
        let mut groups = Vec::new();
        for j in 0..n {
            for (c, rows) in rows_of.iter().enumerate() {
                if rows.is_empty() {
                    continue;
                }
                groups.push((format!("c{c}/{j}"), rows.iter().map(|&i| (i, j)).collect()));
            }
        }
        GroupPartition::new(m, n, groups).expect("class blocks are disjoint")
    }

    /// Parses the text format:
    ///
    /// ```text
    /// # comment
    /// g <id>: (i,j) (i,j) ...
    /// cols <label>: j1..j2 rows i1..i2
    /// ```
    ///
    /// Ranges are inclusive. A `cols` line expands to one group per column
    /// `j` in `j1..=j2`, each holding rows `i1..=i2` of that column.
    pub fn parse(text: &str, m: usize, n: usize) -> Result<Self> {
        let mut groups = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| Error::InvalidGroups(format!("line {}: {msg}", lineno + 1));
            let (head, body) = line.split_once(':').ok_or_else(|| err("missing ':'"))?;
            let mut head_parts = head.split_whitespace();
            let kind = head_parts.next().ok_or_else(|| err("empty header"))?;
            let label = head_parts.next().ok_or_else(|| err("missing group id"))?.to_string();
            if head_parts.next().is_some() {
                return Err(err("unexpected tokens before ':'"));
            }
            match kind {
                "g" => groups.push((label, parse_pairs(body).map_err(|e| err(&e))?)),
                "cols" => {
                    let tokens: Vec<&str> = body.split_whitespace().collect();
                    let [cols, "rows", rows] = tokens.as_slice() else {
                        return Err(err("expected 'j1..j2 rows i1..i2'"));
                    };
                    let (j1, j2) = parse_range(cols).map_err(|e| err(&e))?;
                    let (i1, i2) = parse_range(rows).map_err(|e| err(&e))?;
                    for j in j1..=j2 {
                        groups.push((format!("{label}/{j}"), (i1..=i2).map(|i| (i, j)).collect()));
                    }
                }
                other => return Err(err(&format!("unknown line kind '{other}'"))),
            }
        }
        GroupPartition::new(m, n, groups)
    }

    /// Serializes to the `g <id>: (i,j) ...` form accepted by [`GroupPartition::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (label, idxs) in self.labels.iter().zip(&self.groups) {
            out.push_str("g ");
            out.push_str(label);
            out.push(':');
            for &idx in idxs {
                out.push_str(&format!(" ({},{})", idx / self.n, idx % self.n));
            }
            out.push('\n');
        }
        out
    }

    pub fn dim(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Flattened (row-major) indices of each group.
    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Group id of each flattened entry, or [`NO_GROUP`].
    pub fn membership(&self) -> &[u32] {
        &self.membership
    }
}

fn parse_pairs(body: &str) -> std::result::Result<Vec<(usize, usize)>, String> {
    let compact: String = body.chars().filter(|c| !c.is_whitespace()).collect();
    let mut out = Vec::new();
    for piece in compact.split(')').filter(|s| !s.is_empty()) {
        let inner = piece
            .strip_prefix('(')
            .ok_or_else(|| format!("malformed pair near '{piece}'"))?;
        let (i, j) = inner
            .split_once(',')
            .ok_or_else(|| format!("malformed pair '({inner})'"))?;
        let i = i.parse().map_err(|_| format!("bad row index '{i}'"))?;
        let j = j.parse().map_err(|_| format!("bad column index '{j}'"))?;
        out.push((i, j));
    }
    Ok(out)
}

fn parse_range(tok: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = tok.split_once("..").ok_or_else(|| format!("bad range '{tok}'"))?;
    let a: usize = a.parse().map_err(|_| format!("bad range start '{a}'"))?;
    let b: usize = b.parse().map_err(|_| format!("bad range end '{b}'"))?;
    if a > b {
        return Err(format!("empty range '{tok}'"));
    }
    Ok((a, b))
}
