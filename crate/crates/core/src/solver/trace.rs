//! Convergence traces and their post-hoc analysis.

/// One row of the convergence trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub r_primal: f64,
    /// `None` for solvers without a gap estimate (Sinkhorn).
    pub gap: Option<f64>,
    pub dual_residual: Option<f64>,
    pub support: usize,
    pub elapsed_ms: f64,
}

/// Header of the trace CSV.
pub const TRACE_CSV_HEADER: &str = "iter,r_primal,gap,dual_residual,support,elapsed_ms";

impl TraceRecord {
    /// CSV row matching [`TRACE_CSV_HEADER`]. Missing values are left empty;
    /// `with_timing = false` blanks the wall-clock column.
    pub fn to_csv_row(&self, with_timing: bool) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        let elapsed = if with_timing {
            format!("{:.3}", self.elapsed_ms)
        } else {
            String::new()
        };
        format!(
            "{},{:e},{},{},{},{}",
            self.iter,
            self.r_primal,
            opt(self.gap),
            opt(self.dual_residual),
            self.support,
            elapsed
        )
    }
}

/// Support identification and local rate read off a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceAnalysis {
    /// First iteration from which the support size stays constant to the end.
    pub support_stable_from: usize,
    /// Last iteration in the trace.
    pub last_iter: usize,
    /// Least-squares slope of `ln r_primal` against the iteration on the
    /// post-identification window.
    pub slope: f64,
    /// Coefficient of determination of that fit.
    pub r_squared: f64,
    /// Median of `r_primal(k+1) / r_primal(k)` over the window.
    pub median_ratio: f64,
    /// Number of trace rows in the window.
    pub window_len: usize,
}

impl TraceAnalysis {
    /// Analyzes a trace; `None` when the post-identification window has fewer
    /// than three usable points.
    pub fn from_trace(trace: &[TraceRecord]) -> Option<TraceAnalysis> {
        let last = trace.last()?;
        let final_support = last.support;
        let start = trace
            .iter()
            .rposition(|t| t.support != final_support)
            .map_or(0, |k| k + 1);
        let window: Vec<(f64, f64)> = trace[start..]
            .iter()
            .filter(|t| t.r_primal > 0.0 && t.r_primal.is_finite())
            .map(|t| (t.iter as f64, t.r_primal.ln()))
            .collect();
        if window.len() < 3 {
            return None;
        }
        let (slope, r_squared) = linear_fit(&window);
        let mut ratios: Vec<f64> = window.windows(2).map(|w| (w[1].1 - w[0].1).exp()).collect();
        ratios.sort_by(f64::total_cmp);
        let median_ratio = ratios[ratios.len() / 2];
        Some(TraceAnalysis {
            support_stable_from: trace[start].iter,
            last_iter: last.iter,
            slope,
            r_squared,
            median_ratio,
            window_len: window.len(),
        })
    }
}

/// Ordinary least squares `y = a + b x`; returns `(b, R^2)`.
pub fn linear_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return (0.0, 0.0);
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    (slope, r2)
}
