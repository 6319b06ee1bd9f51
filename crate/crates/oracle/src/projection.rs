use ndarray::Array2;

use crate::linalg::solve_dense;
use crate::{OracleError, Result};

/// Euclidean projection of `z` onto `{X : X 1 = p, X^T 1 = q}` (signs free).
///
/// The minimizer has the form `Z - a 1^T - 1 b^T`. With the gauge `b_n = 0`
/// the marginal equations for the rows and the first `n - 1` columns form a
/// square linear system, solved densely.
pub fn affine_project(z: &Array2<f64>, p: &[f64], q: &[f64]) -> Result<Array2<f64>> {
    let (m, n) = z.dim();
    if m == 0 || n == 0 {
        return Err(OracleError::SingularSystem);
    }
    let k = m + n - 1;
    let mut a = vec![vec![0.0; k]; k];
    let mut rhs = vec![0.0; k];
    for i in 0..m {
        a[i][i] = n as f64;
        for j in 0..n - 1 {
            a[i][m + j] = 1.0;
        }
        rhs[i] = (0..n).map(|j| z[[i, j]]).sum::<f64>() - p[i];
    }
    for j in 0..n - 1 {
        for i in 0..m {
            a[m + j][i] = 1.0;
        }
        a[m + j][m + j] = m as f64;
        rhs[m + j] = (0..m).map(|i| z[[i, j]]).sum::<f64>() - q[j];
    }
    let sol = solve_dense(a, rhs)?;
    Ok(Array2::from_shape_fn((m, n), |(i, j)| {
        let b = if j + 1 < n { sol[m + j] } else { 0.0 };
        z[[i, j]] - sol[i] - b
    }))
}

/// Euclidean projection onto the transport polytope, optionally with the
/// entries outside `allowed` pinned to zero.
///
/// Maximizes the dual `p^T mu + q^T nu - ||[Z + mu 1^T + 1 nu^T]_+||^2 / 2` by
/// semismooth Newton with an exact line search; the primal point is
/// `[Z + mu 1^T + 1 nu^T]_+`.
pub fn polytope_project(
    z: &Array2<f64>,
    p: &[f64],
    q: &[f64],
    allowed: Option<&Array2<bool>>,
) -> Result<Array2<f64>> {
    let (m, n) = z.dim();
    let ok = |i: usize, j: usize| allowed.is_none_or(|a| a[[i, j]]);
    let primal = |mu: &[f64], nu: &[f64]| {
        Array2::from_shape_fn((m, n), |(i, j)| {
            if ok(i, j) {
                (z[[i, j]] + mu[i] + nu[j]).max(0.0)
            } else {
                0.0
            }
        })
    };
    let gradient = |x: &Array2<f64>| {
        let mut g = Vec::with_capacity(m + n);
        for i in 0..m {
            g.push(p[i] - (0..n).map(|j| x[[i, j]]).sum::<f64>());
        }
        for j in 0..n {
            g.push(q[j] - (0..m).map(|i| x[[i, j]]).sum::<f64>());
        }
        g
    };

    let scale = 1.0 + z.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let mut mu = vec![0.0; m];
    let mut nu = vec![0.0; n];
    for _ in 0..1000 {
        let x = primal(&mu, &nu);
        let g = gradient(&x);
        let gmax = g.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        if gmax <= 1e-15 * scale {
            return polish(x, p, q);
        }
        let k = m + n;
        let mut h = vec![vec![0.0; k]; k];
        for i in 0..m {
            for j in 0..n {
                if ok(i, j) && z[[i, j]] + mu[i] + nu[j] > 0.0 {
                    h[i][i] += 1.0;
                    h[m + j][m + j] += 1.0;
                    h[i][m + j] += 1.0;
                    h[m + j][i] += 1.0;
                }
            }
        }
        for (r, row) in h.iter_mut().enumerate() {
            row[r] += 1e-10;
        }
        let d = solve_dense(h, g.clone())?;
        let t = exact_step(z, &mu, &nu, &d, p, q, &ok).min(1.0);
        if !(t > 0.0) || !t.is_finite() {
            // No ascent left along the Newton direction: accept the point if it is feasible.
            return if gmax <= 1e-10 * scale {
                polish(x, p, q)
            } else {
                Err(OracleError::NoConvergence("polytope projection"))
            };
        }
        for i in 0..m {
            mu[i] += t * d[i];
        }
        for j in 0..n {
            nu[j] += t * d[m + j];
        }
    }
    Err(OracleError::NoConvergence("polytope projection"))
}

/// Maximizer over `t >= 0` of the dual along `(mu, nu) + t d`. The derivative
/// is piecewise linear and non-increasing in `t`, so the root is found by
/// scanning its breakpoints.
fn exact_step(
    z: &Array2<f64>,
    mu: &[f64],
    nu: &[f64],
    d: &[f64],
    p: &[f64],
    q: &[f64],
    ok: &impl Fn(usize, usize) -> bool,
) -> f64 {
    let (m, n) = z.dim();
    let lin: f64 = p.iter().zip(d).map(|(a, b)| a * b).sum::<f64>() + q.iter().zip(&d[m..]).map(|(a, b)| a * b).sum::<f64>();
    let mut pieces = Vec::with_capacity(m * n);
    for i in 0..m {
        for j in 0..n {
            if ok(i, j) {
                pieces.push((z[[i, j]] + mu[i] + nu[j], d[i] + d[m + j]));
            }
        }
    }
    let derivative = |t: f64| lin - pieces.iter().map(|&(a, b)| (a + t * b).max(0.0) * b).sum::<f64>();
    let mut breaks: Vec<f64> = pieces
        .iter()
        .filter(|&&(_, b)| b != 0.0)
        .map(|&(a, b)| -a / b)
        .filter(|&t| t > 0.0 && t.is_finite())
        .collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut lo = 0.0;
    for &hi in breaks.iter().chain(std::iter::once(&f64::INFINITY)) {
        if hi.is_finite() && derivative(hi) > 0.0 {
            lo = hi;
            continue;
        }
        // Fixed active set on (lo, hi): derivative(t) = c - s t.
        let mid = if hi.is_finite() { 0.5 * (lo + hi) } else { lo + 1.0 };
        let (mut c, mut slope) = (lin, 0.0);
        for &(a, b) in &pieces {
            if a + mid * b > 0.0 {
                c -= a * b;
                slope += b * b;
            }
        }
        return if slope > 0.0 { (c / slope).clamp(lo, hi) } else { lo };
    }
    lo
}

/// Removes the rounding left in the marginals by the smallest correction
/// `a_i + b_j` supported on the positive entries of `x`.
fn polish(mut x: Array2<f64>, p: &[f64], q: &[f64]) -> Result<Array2<f64>> {
    let (m, n) = x.dim();
    for _ in 0..3 {
        let mut rhs = Vec::with_capacity(m + n);
        for i in 0..m {
            rhs.push(p[i] - (0..n).map(|j| x[[i, j]]).sum::<f64>());
        }
        for j in 0..n {
            rhs.push(q[j] - (0..m).map(|i| x[[i, j]]).sum::<f64>());
        }
        if rhs.iter().all(|r| r.abs() <= 1e-16) {
            break;
        }
        let k = m + n;
        let mut a = vec![vec![0.0; k]; k];
        for i in 0..m {
            for j in 0..n {
                if x[[i, j]] > 0.0 {
                    a[i][i] += 1.0;
                    a[m + j][m + j] += 1.0;
                    a[i][m + j] += 1.0;
                    a[m + j][i] += 1.0;
                }
            }
        }
        for (r, row) in a.iter_mut().enumerate() {
            row[r] += 1e-13;
        }
        let d = solve_dense(a, rhs)?;
        for i in 0..m {
            for j in 0..n {
                if x[[i, j]] > 0.0 {
                    x[[i, j]] = (x[[i, j]] + d[i] + d[m + j]).max(0.0);
                }
            }
        }
    }
    Ok(x)
}

/// Dykstra's alternating projections between the affine marginal set and the
/// non-negative orthant. Slow; used to cross-check [`polytope_project`].
pub fn dykstra_project(z: &Array2<f64>, p: &[f64], q: &[f64], iterations: usize) -> Result<Array2<f64>> {
    let mut x = z.clone();
    let mut pa = Array2::zeros(z.dim());
    let mut pc = Array2::zeros(z.dim());
    for _ in 0..iterations {
        let y = affine_project(&(&x + &pa), p, q)?;
        pa = &x + &pa - &y;
        x = (&y + &pc).mapv(|v: f64| v.max(0.0));
        pc = &y + &pc - &x;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feasibility_residual;
    use ndarray::array;

    #[test]
    fn affine_examples() {
        let p = [0.3, 0.7];
        let q = [0.2, 0.5, 0.3];
        let prod = Array2::from_shape_fn((2, 3), |(i, j)| p[i] * q[j]);
        let x = affine_project(&prod, &p, &q).unwrap();
        assert!((&x - &prod).iter().all(|v| v.abs() < 1e-15));

        let half = [0.5, 0.5];
        let x = affine_project(&Array2::zeros((2, 2)), &half, &half).unwrap();
        assert_eq!(x, array![[0.25, 0.25], [0.25, 0.25]]);
    }

    #[test]
    fn polytope_projection_agrees_with_dykstra() {
        let z = array![[0.4, -0.2, 0.9], [0.1, 0.3, -0.5], [0.7, 0.0, 0.2]];
        let p = [0.2, 0.5, 0.3];
        let q = [0.3, 0.3, 0.4];
        let a = polytope_project(&z, &p, &q, None).unwrap();
        let b = dykstra_project(&z, &p, &q, 20_000).unwrap();
        assert!(feasibility_residual(&a, &p, &q) <= 1e-14);
        assert!(a.iter().all(|&v| v >= 0.0));
        let diff = (&a - &b).iter().fold(0.0f64, |s, v| s.max(v.abs()));
        assert!(diff < 1e-8, "{diff}");
    }

    #[test]
    fn mask_pins_entries() {
        let allowed = array![[true, false], [true, true]];
        let x = polytope_project(&Array2::zeros((2, 2)), &[0.5, 0.5], &[0.5, 0.5], Some(&allowed)).unwrap();
        assert_eq!(x[[0, 1]], 0.0);
        assert!((x[[0, 0]] - 0.5).abs() < 1e-14 && (x[[1, 1]] - 0.5).abs() < 1e-14);
    }
}
