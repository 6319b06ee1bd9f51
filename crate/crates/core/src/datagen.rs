//! Seeded experiment generators and the domain adaptation pipeline.
//!
//! All generators draw from [`ChaCha8Rng`] seeded with `seed_from_u64`, so a
//! `(sizes, seed)` pair identifies a problem on every platform.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::problem::{GroupPartition, Problem};
use crate::regularizer::RegularizerKind;
use crate::solver::{solve, SolverOptions, Termination};
use crate::{Error, Result};

/// Points in `R^d`, one per row, with optional class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Array2<f64>,
    labels: Option<Vec<usize>>,
}

impl PointCloud {
    pub fn new(points: Array2<f64>, labels: Option<Vec<usize>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != points.nrows() {
                return Err(Error::InvalidPointCloud(format!(
                    "{} labels for {} points",
                    l.len(),
                    points.nrows()
                )));
            }
        }
        Ok(PointCloud { points, labels })
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    /// Same points with replaced labels.
    pub fn with_labels(self, labels: Option<Vec<usize>>) -> Result<Self> {
        PointCloud::new(self.points, labels)
    }

    /// Points carrying `label`, in their original order.
    pub fn class(&self, label: usize) -> Array2<f64> {
        let idx: Vec<usize> = match &self.labels {
            Some(l) => (0..self.len()).filter(|&i| l[i] == label).collect(),
            None => Vec::new(),
        };
        self.points.select(Axis(0), &idx)
    }

    /// CSV with header `x0,x1,...[,label]`.
    pub fn to_csv(&self) -> String {
        let mut header: Vec<String> = (0..self.dim()).map(|k| format!("x{k}")).collect();
        if self.labels.is_some() {
            header.push("label".into());
        }
        let mut out = header.join(",");
        out.push('\n');
        for (i, row) in self.points.outer_iter().enumerate() {
            let mut fields: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            if let Some(l) = &self.labels {
                fields.push(l[i].to_string());
            }
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    /// Parses the format written by [`PointCloud::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| Error::InvalidPointCloud("empty file".into()))?
            .split(',')
            .map(str::trim)
            .collect();
        let labeled = header.last() == Some(&"label");
        let d = header.len() - labeled as usize;
        for (k, h) in header[..d].iter().enumerate() {
            if *h != format!("x{k}") {
                return Err(Error::InvalidPointCloud(format!("unexpected column {h:?}")));
            }
        }
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for (line_no, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != header.len() {
                return Err(Error::InvalidPointCloud(format!(
                    "row {} has {} fields, expected {}",
                    line_no + 1,
                    fields.len(),
                    header.len()
                )));
            }
            for f in &fields[..d] {
                let v: f64 = f
                    .parse()
                    .map_err(|_| Error::InvalidPointCloud(format!("row {}: bad number {f:?}", line_no + 1)))?;
                data.push(v);
            }
            if labeled {
                let l = fields[d]
                    .parse()
                    .map_err(|_| Error::InvalidPointCloud(format!("row {}: bad label {:?}", line_no + 1, fields[d])))?;
                labels.push(l);
            }
        }
        let rows = data.len() / d.max(1);
        let points = Array2::from_shape_vec((rows, d), data).map_err(|e| Error::InvalidPointCloud(e.to_string()))?;
        PointCloud::new(points, labeled.then_some(labels))
    }
}

/// `C_ij = ||x_i - y_j||^2 / 2`.
pub fn half_squared_distances(source: &Array2<f64>, target: &Array2<f64>) -> Array2<f64> {
    Array2::from_shape_fn((source.nrows(), target.nrows()), |(i, j)| {
        let d: f64 = source
            .row(i)
            .iter()
            .zip(target.row(j).iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        0.5 * d
    })
}

fn uniform(k: usize) -> Array1<f64> {
    Array1::from_elem(k, 1.0 / k as f64)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// `k` draws from `N(mean, L L^T)` in the plane.
fn gaussian_cloud(rng: &mut ChaCha8Rng, k: usize, mean: [f64; 2], l: [[f64; 2]; 2]) -> Array2<f64> {
    let mut pts = Array2::zeros((k, 2));
    for mut row in pts.outer_iter_mut() {
        let (z0, z1) = (normal(rng), normal(rng));
        row[0] = mean[0] + l[0][0] * z0 + l[0][1] * z1;
        row[1] = mean[1] + l[1][0] * z0 + l[1][1] * z1;
    }
    pts
}

fn random_gaussian(rng: &mut ChaCha8Rng) -> ([f64; 2], [[f64; 2]; 2]) {
    let mean = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
    let l = [
        [rng.random_range(0.5..2.0), 0.0],
        [rng.random_range(-1.0..1.0), rng.random_range(0.5..2.0)],
    ];
    (mean, l)
}

fn normalized(cost: Array2<f64>, m: usize, n: usize) -> Problem {
    Problem::new(cost, uniform(m), uniform(n))
        .expect("generated data is valid")
        .normalize_cost()
        .0
}

/// Two planar Gaussian clouds with random parameters, the normalized cost
/// `||x_i - y_j||^2 / 2` (`max C = 1`) and uniform marginals.
pub fn gaussian_problem(m: usize, n: usize, seed: u64) -> Result<(Problem, PointCloud, PointCloud)> {
    if m == 0 || n == 0 {
        return Err(Error::invalid("size", "m and n must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (ms, ls) = random_gaussian(&mut rng);
    let (mt, lt) = random_gaussian(&mut rng);
    let xs = gaussian_cloud(&mut rng, m, ms, ls);
    let xt = gaussian_cloud(&mut rng, n, mt, lt);
    let problem = normalized(half_squared_distances(&xs, &xt), m, n);
    Ok((problem, PointCloud::new(xs, None)?, PointCloud::new(xt, None)?))
}

/// Knobs of the adaptation generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptationParams {
    /// Distance of the class means from the origin.
    pub separation: f64,
    /// Standard deviation of each class along both axes.
    pub spread: f64,
    /// Largest rotation angle of the target map, in radians.
    pub max_rotation: f64,
    /// Largest deviation of the target map's scale from 1.
    pub max_scaling: f64,
    /// Largest translation per coordinate.
    pub max_shift: f64,
}

impl Default for AdaptationParams {
    fn default() -> Self {
        AdaptationParams {
            separation: 2.0,
            spread: 1.0,
            max_rotation: PI / 8.0,
            max_scaling: 0.1,
            max_shift: 1.0,
        }
    }
}

impl AdaptationParams {
    /// Target equals a fresh draw from the source distribution.
    pub fn identity_map(self) -> Self {
        AdaptationParams {
            max_rotation: 0.0,
            max_scaling: 0.0,
            max_shift: 0.0,
            ..self
        }
    }
}

/// Contiguous, balanced class blocks: sizes differ by at most one.
pub fn balanced_labels(k: usize, classes: usize) -> Vec<usize> {
    (0..k).map(|i| i * classes / k).collect()
}

/// A labeled adaptation task with [`AdaptationParams::default`].
pub fn adaptation_problem(
    m: usize,
    n: usize,
    classes: usize,
    seed: u64,
) -> Result<(Problem, GroupPartition, PointCloud, PointCloud)> {
    adaptation_problem_with(m, n, classes, seed, &AdaptationParams::default())
}

/// A labeled adaptation task.
///
/// Class `c` is an isotropic Gaussian centred at `separation` times the unit
/// vector at angle `2 pi c / classes`. Source and target are independent
/// draws with balanced class blocks; the target is then moved by a random
/// rotation, scaling and translation. The groups are the rows of each source
/// class within each target column. The target labels are returned for
/// evaluation only.
pub fn adaptation_problem_with(
    m: usize,
    n: usize,
    classes: usize,
    seed: u64,
    params: &AdaptationParams,
) -> Result<(Problem, GroupPartition, PointCloud, PointCloud)> {
    if classes == 0 {
        return Err(Error::invalid("classes", "must be at least 1"));
    }
    if m < classes || n < classes {
        return Err(Error::invalid("size", format!("need at least {classes} points per cloud")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means: Vec<[f64; 2]> = (0..classes)
        .map(|c| {
            let angle = 2.0 * PI * c as f64 / classes as f64;
            [params.separation * angle.cos(), params.separation * angle.sin()]
        })
        .collect();
    let iso = [[params.spread, 0.0], [0.0, params.spread]];
    let draw = |rng: &mut ChaCha8Rng, labels: &[usize]| {
        let mut pts = Array2::zeros((labels.len(), 2));
        for (mut row, &c) in pts.outer_iter_mut().zip(labels) {
            let p = gaussian_cloud(rng, 1, means[c], iso);
            row.assign(&p.row(0));
        }
        pts
    };
    let ys = balanced_labels(m, classes);
    let yt = balanced_labels(n, classes);
    let xs = draw(&mut rng, &ys);
    let mut xt = draw(&mut rng, &yt);

    let angle = params.max_rotation * rng.random_range(-1.0..=1.0);
    let scale = 1.0 + params.max_scaling * rng.random_range(-1.0..=1.0);
    let shift = [
        params.max_shift * rng.random_range(-1.0..=1.0),
        params.max_shift * rng.random_range(-1.0..=1.0),
    ];
    let (sin, cos) = angle.sin_cos();
    for mut row in xt.outer_iter_mut() {
        let (a, b) = (row[0], row[1]);
        row[0] = scale * (cos * a - sin * b) + shift[0];
        row[1] = scale * (sin * a + cos * b) + shift[1];
    }

    let problem = normalized(half_squared_distances(&xs, &xt), m, n);
    let groups = GroupPartition::column_class_blocks(n, &ys);
    Ok((
        problem,
        groups,
        PointCloud::new(xs, Some(ys))?,
        PointCloud::new(xt, Some(yt))?,
    ))
}

/// `x_i <- sum_j X_ij y_j / p_i`. Rows with `p_i = 0` are mapped to NaN.
pub fn barycentric_map(plan: &Array2<f64>, p: &Array1<f64>, target: &PointCloud) -> Result<PointCloud> {
    if plan.ncols() != target.len() || plan.nrows() != p.len() {
        return Err(Error::DimensionMismatch(format!(
            "plan {:?}, p {}, target {}",
            plan.dim(),
            p.len(),
            target.len()
        )));
    }
    let mut mapped = plan.dot(target.points());
    for (mut row, &pi) in mapped.outer_iter_mut().zip(p) {
        if pi > 0.0 {
            row /= pi;
        } else {
            row.fill(f64::NAN);
        }
    }
    PointCloud::new(mapped, None)
}

/// Sum over classes of the unregularized OT value between the adapted and
/// target points of each class, with uniform weights and cost
/// `||x - y||^2 / 2`.
pub fn class_w2_score(adapted: &PointCloud, target: &PointCloud) -> Result<f64> {
    let (la, lt) = match (adapted.labels(), target.labels()) {
        (Some(a), Some(t)) => (a, t),
        _ => return Err(Error::InvalidPointCloud("both clouds need labels".into())),
    };
    let classes = la.iter().chain(lt).copied().max().map_or(0, |c| c + 1);
    let mut total = 0.0;
    for c in 0..classes {
        let (xa, xt) = (adapted.class(c), target.class(c));
        if xa.nrows() == 0 && xt.nrows() == 0 {
            continue;
        }
        if xa.nrows() == 0 || xt.nrows() == 0 {
            return Err(Error::EmptyClass(c));
        }
        total += ot_value(&xa, &xt)?;
    }
    Ok(total)
}

fn ot_value(xs: &Array2<f64>, xt: &Array2<f64>) -> Result<f64> {
    let (m, n) = (xs.nrows(), xt.nrows());
    let raw = Problem::new(half_squared_distances(xs, xt), uniform(m), uniform(n))?;
    let (problem, scale) = raw.normalize_cost();
    let options = SolverOptions {
        tol_primal: 1e-7,
        max_iter: 1_000_000,
        ..SolverOptions::default()
    };
    let report = solve(&problem, &RegularizerKind::Zero, &options)?;
    if report.termination != Termination::Converged {
        return Err(Error::NoConvergence("class OT"));
    }
    Ok(report.objective * scale.factor())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn singleton_cost_normalizes_to_one() {
        let (problem, _, _) = gaussian_problem(1, 1, 7).unwrap();
        assert_eq!(problem.cost(), &array![[1.0]]);
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(gaussian_problem(30, 20, 3).unwrap(), gaussian_problem(30, 20, 3).unwrap());
        assert_ne!(gaussian_problem(30, 20, 3).unwrap().0, gaussian_problem(30, 20, 4).unwrap().0);
        assert_eq!(adaptation_problem(12, 9, 2, 1).unwrap(), adaptation_problem(12, 9, 2, 1).unwrap());
    }

    #[test]
    fn gaussian_problem_shape() {
        let (problem, xs, xt) = gaussian_problem(200, 300, 0).unwrap();
        assert_eq!(problem.cost().iter().copied().fold(0.0, f64::max), 1.0);
        assert!(problem.cost().iter().all(|&c| c >= 0.0));
        assert!((problem.p()[0] - 1.0 / 200.0).abs() < 1e-18);
        assert_eq!((xs.len(), xt.len(), xs.dim()), (200, 300, 2));
    }

    #[test]
    fn adaptation_group_counts() {
        let (_, groups, _, _) = adaptation_problem(5, 7, 1, 0).unwrap();
        assert_eq!(groups.len(), 7);
        let (_, groups, xs, _) = adaptation_problem(4, 3, 2, 0).unwrap();
        assert_eq!(groups.len(), 6);
        assert!(groups.groups().iter().all(|g| g.len() == 2));
        assert_eq!(xs.labels().unwrap(), &[0, 0, 1, 1]);
    }

    #[test]
    fn balanced_labels_differ_by_at_most_one() {
        let labels = balanced_labels(7, 3);
        let counts: Vec<usize> = (0..3).map(|c| labels.iter().filter(|&&l| l == c).count()).collect();
        assert_eq!(counts, vec![3, 2, 2]);
        assert!(labels.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn barycentric_map_examples() {
        let target = PointCloud::new(array![[0.0, 0.0], [2.0, 0.0], [0.0, 4.0]], None).unwrap();
        let p = array![0.5, 0.5];
        let assignment = array![[0.0, 0.5, 0.0], [0.0, 0.0, 0.5]];
        let mapped = barycentric_map(&assignment, &p, &target).unwrap();
        assert_eq!(mapped.points(), &array![[2.0, 0.0], [0.0, 4.0]]);

        let q = array![0.25, 0.25, 0.5];
        let product = Array2::from_shape_fn((2, 3), |(i, j)| p[i] * q[j]);
        let mapped = barycentric_map(&product, &p, &target).unwrap();
        for row in mapped.points().outer_iter() {
            assert!((row[0] - 0.5).abs() < 1e-15 && (row[1] - 2.0).abs() < 1e-15);
        }

        let zero_row = barycentric_map(&product, &array![0.0, 1.0], &target).unwrap();
        assert!(zero_row.points().row(0).iter().all(|v| v.is_nan()));
    }

    #[test]
    fn w2_score_examples() {
        let a = PointCloud::new(array![[0.0, 0.0], [1.0, 1.0], [3.0, 0.0]], Some(vec![0, 0, 1])).unwrap();
        assert!(class_w2_score(&a, &a).unwrap().abs() < 1e-7);

        let b = PointCloud::new(array![[0.0, 0.0], [5.0, 5.0]], Some(vec![0, 1])).unwrap();
        let c = PointCloud::new(array![[3.0, 0.0], [5.0, 1.0]], Some(vec![0, 1])).unwrap();
        assert!((class_w2_score(&b, &c).unwrap() - (4.5 + 8.0)).abs() < 1e-9);

        let missing = PointCloud::new(array![[0.0, 0.0]], Some(vec![1])).unwrap();
        assert_eq!(class_w2_score(&b, &missing).unwrap_err(), Error::EmptyClass(0));
    }

    #[test]
    fn csv_round_trip() {
        let (_, _, xs, _) = adaptation_problem(6, 4, 2, 9).unwrap();
        let text = xs.to_csv();
        assert!(text.starts_with("x0,x1,label\n"));
        assert_eq!(PointCloud::from_csv(&text).unwrap(), xs);
        let bare = PointCloud::new(array![[1.5, -2.0]], None).unwrap();
        assert_eq!(PointCloud::from_csv(&bare.to_csv()).unwrap(), bare);
        assert!(PointCloud::from_csv("x0,x1\n1.0\n").is_err());
    }
}
