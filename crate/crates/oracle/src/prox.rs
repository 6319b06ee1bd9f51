use ndarray::Array2;
use rdrot::RegularizerKind;

use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxOracleOptions {
    pub max_iter: usize,
    /// Stop once a step moves the iterate by less than this (Frobenius).
    pub tol: f64,
}

impl Default for ProxOracleOptions {
    fn default() -> Self {
        ProxOracleOptions {
            max_iter: 10_000,
            tol: 1e-14,
        }
    }
}

/// `prox_{rho f}(V)` with `f(Z) = <C, Z> + h(Z) + iota_{Z >= 0}`, by projected
/// gradient with backtracking, minimizing
/// `<C, Z> + h(Z) + ||Z - V||^2 / (2 rho)`.
///
/// Groups at zero use the minimum-norm subgradient; after the descent each
/// group is compared against its all-zero alternative.
pub fn prox_f_oracle(
    reg: &RegularizerKind,
    cost: &Array2<f64>,
    v: &Array2<f64>,
    rho: f64,
    options: &ProxOracleOptions,
) -> Result<Array2<f64>> {
    let dim = v.dim();
    let allowed: Array2<bool> = match reg {
        RegularizerKind::Forbidden(f) => f.mask().mapv(|forbidden| !forbidden),
        _ => Array2::from_elem(dim, true),
    };
    let smooth = Smooth { reg, cost, v, rho };
    let project = |z: &Array2<f64>| {
        Array2::from_shape_fn(dim, |(i, j)| if allowed[[i, j]] { z[[i, j]].max(0.0) } else { 0.0 })
    };

    let mut z = project(&(v - &(rho * cost)));
    let mut t = rho;
    let mut f = smooth.value(&z);
    let mut g = smooth.gradient(&z);
    for _ in 0..options.max_iter {
        // Backtrack on a local Lipschitz estimate of the gradient, which does
        // not cancel near the minimizer. Group norms have a kink at zero where
        // that estimate fails, so plain descent of the objective also counts.
        let mut accepted = None;
        for _ in 0..100 {
            let cand = project(&(&z - &(t * &g)));
            let d = &cand - &z;
            let g_cand = smooth.gradient(&cand);
            let sq = d.iter().map(|x| x * x).sum::<f64>();
            let fc = smooth.value(&cand);
            let lipschitz = ((&g_cand - &g) * &d).sum() <= sq / t;
            let descent = fc < f && fc <= f + (&g * &d).sum() + sq / (2.0 * t);
            if lipschitz || descent {
                accepted = Some((cand, fc, g_cand, sq.sqrt()));
                break;
            }
            t *= 0.5;
        }
        // Exhausting the search means no descent from z at any step length.
        let Some((cand, fc, g_cand, step)) = accepted else {
            break;
        };
        z = cand;
        f = fc;
        g = g_cand;
        t *= 2.0;
        if step <= options.tol {
            break;
        }
    }

    if let RegularizerKind::GroupLasso(gl) = reg {
        for group in gl.groups().groups() {
            let mut zeroed = z.clone();
            for &flat in group {
                zeroed[[flat / dim.1, flat % dim.1]] = 0.0;
            }
            if smooth.value(&zeroed) < smooth.value(&z) {
                z = zeroed;
            }
        }
    }
    Ok(z)
}

struct Smooth<'a> {
    reg: &'a RegularizerKind,
    cost: &'a Array2<f64>,
    v: &'a Array2<f64>,
    rho: f64,
}

impl Smooth<'_> {
    fn value(&self, z: &Array2<f64>) -> f64 {
        let base: f64 = z
            .iter()
            .zip(self.cost.iter())
            .zip(self.v.iter())
            .map(|((&z, &c), &v)| c * z + (z - v) * (z - v) / (2.0 * self.rho))
            .sum();
        let h = match self.reg {
            RegularizerKind::Zero | RegularizerKind::Forbidden(_) => 0.0,
            RegularizerKind::Quadratic(q) => 0.5 * q.alpha() * z.iter().map(|x| x * x).sum::<f64>(),
            RegularizerKind::WeightedL1(w) => w.weights().iter().zip(z.iter()).map(|(w, x)| w * x.abs()).sum(),
            RegularizerKind::Hypentropic(h) => {
                let b = h.beta();
                z.iter().map(|&x| x * (x / b).asinh() - (x * x + b * b).sqrt()).sum()
            }
            RegularizerKind::GroupLasso(gl) => {
                let zs = z.as_slice().unwrap();
                gl.groups()
                    .groups()
                    .iter()
                    .map(|g| gl.lambda() * g.iter().map(|&k| zs[k] * zs[k]).sum::<f64>().sqrt())
                    .sum()
            }
        };
        base + h
    }

    fn gradient(&self, z: &Array2<f64>) -> Array2<f64> {
        let mut g = Array2::from_shape_fn(z.dim(), |(i, j)| {
            self.cost[[i, j]] + (z[[i, j]] - self.v[[i, j]]) / self.rho
        });
        match self.reg {
            RegularizerKind::Zero | RegularizerKind::Forbidden(_) => {}
            RegularizerKind::Quadratic(q) => g.zip_mut_with(z, |g, &x| *g += q.alpha() * x),
            RegularizerKind::WeightedL1(w) => {
                // Only reached on Z >= 0, where |x| is linear.
                g.zip_mut_with(w.weights(), |g, &w| *g += w);
            }
            RegularizerKind::Hypentropic(h) => g.zip_mut_with(z, |g, &x| *g += (x / h.beta()).asinh()),
            RegularizerKind::GroupLasso(gl) => {
                let zs = z.as_slice().unwrap();
                let gs = g.as_slice_mut().unwrap();
                for group in gl.groups().groups() {
                    let norm = group.iter().map(|&k| zs[k] * zs[k]).sum::<f64>().sqrt();
                    if norm > 0.0 {
                        for &k in group {
                            gs[k] += gl.lambda() * zs[k] / norm;
                        }
                    } else {
                        // Minimum-norm subgradient over the directions that
                        // keep the group non-negative.
                        let pull = group.iter().map(|&k| gs[k].min(0.0).powi(2)).sum::<f64>().sqrt();
                        let keep = if pull > gl.lambda() { 1.0 - gl.lambda() / pull } else { 0.0 };
                        for &k in group {
                            if gs[k] < 0.0 {
                                gs[k] *= keep;
                            }
                        }
                    }
                }
            }
        }
        g
    }
}
