use approx::assert_abs_diff_eq;
use ndarray::{array, Array1, Array2};
use proptest::prelude::*;

use rdrot::datagen::{
    adaptation_problem, adaptation_problem_with, barycentric_map, class_w2_score, gaussian_problem, AdaptationParams,
    PointCloud,
};
use rdrot::duality::duality_gap;
use rdrot::sinkhorn::{sinkhorn, SinkhornOptions};
use rdrot::{solve, Problem, RegularizerKind, SolverOptions, Termination};

#[test]
fn gaussian_problem_solves_with_small_gap() {
    let (problem, _, _) = gaussian_problem(30, 40, 3).unwrap();
    let reg = RegularizerKind::quadratic(0.5).unwrap();
    let options = SolverOptions {
        tol_primal: 1e-8,
        tol_gap: Some(1e-8),
        ..SolverOptions::default()
    };
    let report = solve(&problem, &reg, &options).unwrap();
    assert_eq!(report.termination, Termination::Converged);
    let cert = duality_gap(&problem, &reg, report.state.as_ref().unwrap(), report.rho);
    assert!(cert.gap.abs() <= 1e-8);
    let (ep, eq) = report.plan.marginal_errors(problem.p().view(), problem.q().view());
    assert!(ep.max(eq) <= 1e-8);
}

#[test]
fn entropic_plan_approaches_unregularized_value() {
    let (problem, _, _) = gaussian_problem(12, 9, 1).unwrap();
    let exact = solve(
        &problem,
        &RegularizerKind::Zero,
        &SolverOptions {
            tol_primal: 1e-10,
            tol_gap: Some(1e-10),
            max_iter: 1_000_000,
            ..SolverOptions::default()
        },
    )
    .unwrap();
    let entropic = sinkhorn(
        &problem,
        &SinkhornOptions {
            epsilon: 1e-3,
            tol: 1e-10,
            log_domain: true,
            max_iter: 1_000_000,
            ..SinkhornOptions::default()
        },
    )
    .unwrap();
    assert!(entropic.objective >= exact.objective - 1e-9);
    assert!(entropic.objective - exact.objective < 1e-2);
}

#[test]
fn adaptation_groups_count_class_blocks() {
    let (_, groups, source, target) = adaptation_problem(4, 3, 2, 0).unwrap();
    assert_eq!(groups.len(), 6);
    assert!(groups.groups().iter().all(|g| g.len() == 2));
    assert_eq!(source.labels().unwrap(), &[0, 0, 1, 1]);
    assert_eq!(target.len(), 3);
    let (_, single, _, _) = adaptation_problem(5, 7, 1, 0).unwrap();
    assert_eq!(single.len(), 7);
}

#[test]
fn assignment_plan_maps_onto_target_points() {
    let target = PointCloud::new(array![[0.0, 1.0], [2.0, 3.0], [4.0, 5.0]], None).unwrap();
    let plan = array![[0.0, 0.0, 1.0 / 3.0], [1.0 / 3.0, 0.0, 0.0], [0.0, 1.0 / 3.0, 0.0]];
    let p = Array1::from_elem(3, 1.0 / 3.0);
    let mapped = barycentric_map(&plan, &p, &target).unwrap();
    let expected = array![[4.0, 5.0], [0.0, 1.0], [2.0, 3.0]];
    for (a, b) in mapped.points().iter().zip(expected.iter()) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }
}

#[test]
fn product_plan_maps_onto_the_target_barycenter() {
    let target = PointCloud::new(array![[0.0, 0.0], [3.0, 0.0], [0.0, 6.0]], None).unwrap();
    let p = array![0.2, 0.8];
    let q = array![0.5, 0.25, 0.25];
    let plan = Array2::from_shape_fn((2, 3), |(i, j)| p[i] * q[j]);
    let mapped = barycentric_map(&plan, &p, &target).unwrap();
    for row in mapped.points().outer_iter() {
        assert_abs_diff_eq!(row[0], 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(row[1], 1.5, epsilon = 1e-12);
    }
}

#[test]
fn identical_clouds_score_zero() {
    let (_, _, _, target) = adaptation_problem(10, 10, 2, 4).unwrap();
    assert!(class_w2_score(&target, &target).unwrap().abs() < 1e-9);
}

#[test]
fn group_lasso_keeps_separable_classes_apart() {
    let params = AdaptationParams {
        separation: 6.0,
        ..AdaptationParams::default()
    }
    .identity_map();
    let (problem, groups, source, target) = adaptation_problem_with(40, 30, 2, 2, &params).unwrap();
    let reg = RegularizerKind::group_lasso(1e-3, groups).unwrap();
    let report = solve(&problem, &reg, &SolverOptions::default()).unwrap();
    let (ys, yt) = (source.labels().unwrap(), target.labels().unwrap());
    for class in 0..2 {
        let mut same = 0.0;
        let mut total = 0.0;
        for ((i, j), &v) in report.plan.entries().indexed_iter() {
            if ys[i] == class {
                total += v;
                if yt[j] == class {
                    same += v;
                }
            }
        }
        assert!(same / total >= 0.99, "class {class}: {}", same / total);
    }
}

fn problem_strategy() -> impl Strategy<Value = Problem> {
    (1usize..5, 1usize..5).prop_flat_map(|(m, n)| {
        (
            prop::collection::vec(0.0f64..1.0, m * n),
            prop::collection::vec(0.1f64..1.0, m),
            prop::collection::vec(0.1f64..1.0, n),
        )
            .prop_map(move |(c, p, q)| {
                let p = Array1::from(p);
                let q = Array1::from(q);
                let (sp, sq) = (p.sum(), q.sum());
                Problem::new(Array2::from_shape_vec((m, n), c).unwrap(), p / sp, q / sq).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn converged_plans_are_feasible(problem in problem_strategy(), alpha in 0.01f64..2.0) {
        let reg = RegularizerKind::quadratic(alpha).unwrap();
        let options = SolverOptions { tol_primal: 1e-9, max_iter: 1_000_000, ..SolverOptions::default() };
        let report = solve(&problem, &reg, &options).unwrap();
        prop_assert!(report.converged());
        prop_assert!(report.plan.entries().iter().all(|&v| v >= 0.0));
        let (ep, eq) = report.plan.marginal_errors(problem.p().view(), problem.q().view());
        prop_assert!(ep.max(eq) <= 1e-9);
    }

    #[test]
    fn scaling_the_cost_scales_the_unregularized_value(problem in problem_strategy(), factor in 0.5f64..4.0) {
        let options = SolverOptions {
            tol_primal: 1e-10,
            tol_gap: Some(1e-10),
            max_iter: 1_000_000,
            ..SolverOptions::default()
        };
        let base = solve(&problem, &RegularizerKind::Zero, &options).unwrap();
        let scaled_problem = problem.with_cost(problem.cost() * factor).unwrap();
        let scaled = solve(&scaled_problem, &RegularizerKind::Zero, &options).unwrap();
        prop_assert!((scaled.objective - factor * base.objective).abs() <= 1e-7);
    }
}
