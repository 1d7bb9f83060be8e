mod common;

use common::*;
use ndarray::{Array1, Array2};
use projection_pursuit::models::Model;
use projection_pursuit::solvers::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn max_diff(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    (a - b).iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn orthonormal_instance(seed: u64) -> (Array2<f64>, Array1<f64>, Array1<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = orthonormal_design(&mut rng, 40, 8);
    let y = random_vector(&mut rng, 40, 2.0);
    let z = x.t().dot(&y) / 40.0;
    (x, y, z)
}

#[test]
fn lasso_orthonormal_closed_form() {
    for seed in 0..5 {
        let (x, y, z) = orthonormal_instance(seed);
        let lambda = 0.15;
        let fit = lasso_coordinate_descent(x.view(), y.view(), lambda, &SolverOptions::default()).unwrap();
        let expect = z.mapv(|v| soft_threshold(v, lambda));
        assert!(max_diff(&fit.coefficients, &expect) <= 1e-6);
        assert!(lasso_kkt_residual(x.view(), y.view(), fit.coefficients.view(), lambda) <= 1e-6);
    }
}

#[test]
fn dantzig_orthonormal_closed_form() {
    let opts = AdmmOptions {
        tolerance: 1e-10,
        max_iterations: 200_000,
        ..AdmmOptions::default()
    };
    for seed in 0..5 {
        let (x, y, z) = orthonormal_instance(seed);
        let lambda = 0.15;
        let b = dantzig_selector(x.view(), y.view(), lambda, &opts).unwrap();
        let expect = z.mapv(|v| soft_threshold(v, lambda));
        assert!(max_diff(&b, &expect) <= 1e-6, "{b} vs {expect}");
        let corr = x.t().dot(&(&y - &x.dot(&b))) / 40.0;
        let excess = corr.iter().fold(0.0_f64, |m, v| m.max(v.abs() - lambda));
        assert!(excess <= 1e-6);
    }
}

#[test]
fn scaled_lasso_is_a_fixed_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = Array2::from_shape_fn((80, 30), |_| rng.gen_range(-1.7..1.7));
    let mut y = x.column(0).to_owned() * 2.0 - &x.column(1);
    y += &random_vector(&mut rng, 80, 1.0);
    let lambda0 = universal_lambda(80, 30);
    let fit = scaled_lasso(x.view(), y.view(), lambda0, &SolverOptions::default()).unwrap();
    assert!(fit.converged);
    let resid = &y - &x.dot(&fit.coefficients);
    let sigma = resid.dot(&resid).sqrt() / 80f64.sqrt();
    assert!((sigma - fit.sigma).abs() <= 1e-6);
    assert!(lasso_kkt_residual(x.view(), y.view(), fit.coefficients.view(), fit.sigma * lambda0) <= 1e-6);
}

#[test]
fn logistic_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = Array2::from_shape_fn((50, 6), |_| rng.gen_range(-1.0..1.0));
    let y = Array1::from_shape_fn(50, |_| if rng.gen::<bool>() { 1.0 } else { 0.0 });
    for _ in 0..20 {
        let beta = random_vector(&mut rng, 6, 1.5);
        let grad = Model::Logistic.scores(x.view(), y.view(), beta.view()).mean_axis(ndarray::Axis(0)).unwrap();
        let h = 1e-5;
        for j in 0..6 {
            let mut up = beta.clone();
            let mut dn = beta.clone();
            up[j] += h;
            dn[j] -= h;
            let fd = (logistic_objective(x.view(), y.view(), up.view(), 0.0)
                - logistic_objective(x.view(), y.view(), dn.view(), 0.0))
                / (2.0 * h);
            assert!((fd - grad[j]).abs() <= 1e-6 * grad[j].abs().max(1e-3), "{fd} vs {}", grad[j]);
        }
    }
}

#[test]
fn logistic_lasso_kkt() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = Array2::from_shape_fn((120, 15), |_| rng.gen_range(-1.0..1.0));
    let y = Array1::from_shape_fn(120, |i| {
        let e: f64 = 2.0 * x[[i, 0]] - x[[i, 3]];
        if rng.gen::<f64>() < 1.0 / (1.0 + (-e).exp()) { 1.0 } else { 0.0 }
    });
    for lambda in [0.01, 0.03, 0.1] {
        let fit = logistic_lasso(x.view(), y.view(), lambda, &SolverOptions::default()).unwrap();
        assert!(fit.converged);
        assert!(logistic_kkt_residual(x.view(), y.view(), fit.coefficients.view(), lambda) <= 1e-6);
    }
}

#[test]
fn simplex_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut feasible = 0;
    for _ in 0..200 {
        let p = rng.gen_range(1..=3);
        let k = rng.gen_range(1..=5);
        let a = Array2::from_shape_fn((k, p), |_| rng.gen_range(-2.0..2.0));
        let centre = random_vector(&mut rng, k, 1.5);
        let width = Array1::from_shape_fn(k, |_| if rng.gen::<f64>() < 0.2 { 0.0 } else { rng.gen_range(0.0..1.0) });
        let lower = &centre - &width;
        let upper = &centre + &width;
        let lazy: Vec<bool> = (0..k).map(|_| rng.gen()).collect();
        let sol = l1_box_simplex(a.view(), lower.view(), upper.view(), &lazy, &SimplexOptions::default()).unwrap();
        match vertex_lp(a.view(), lower.view(), upper.view()) {
            Some(best) => {
                feasible += 1;
                assert_eq!(sol.status, LpStatus::Optimal);
                let l1: f64 = sol.theta.iter().map(|v| v.abs()).sum();
                assert!((l1 - best).abs() <= 1e-7 * (1.0 + best), "{l1} vs {best}");
                assert!(box_violation(a.view(), lower.view(), upper.view(), sol.theta.view()) <= 1e-8);
            }
            None => assert_eq!(sol.status, LpStatus::Infeasible),
        }
    }
    assert!(feasible > 50);
}

#[test]
fn cv_is_seed_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = Array2::from_shape_fn((60, 5), |_| rng.gen_range(-1.0..1.0));
    let y = Array1::from_shape_fn(60, |i| if x[[i, 0]] + rng.gen_range(-0.5..0.5) > 0.0 { 1.0 } else { 0.0 });
    let grid = logistic_lambda_grid(x.view(), y.view(), 10, 0.05);
    let a = cross_validate_logistic(x.view(), y.view(), &grid, 5, 3, &SolverOptions::default()).unwrap();
    let b = cross_validate_logistic(x.view(), y.view(), &grid, 5, 3, &SolverOptions::default()).unwrap();
    assert_eq!(a, b);
    assert!(grid.contains(&a.lambda));
}
