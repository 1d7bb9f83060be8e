mod common;

use common::*;
use ndarray::{concatenate, s, Array1, Array2, Axis};
use projection_pursuit::linalg::gram;
use projection_pursuit::precision::{clime_pooled, clime_violations, ClimeConfig, LpSolver};
use projection_pursuit::simulate::{generate_dataset, SimConfig};
use projection_pursuit::solvers::AdmmOptions;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn every_row_feasible_at_recorded_tuning() {
    for (n, p, rho, seed) in [(120, 30, 0.0, 1), (100, 80, 0.5, 2), (60, 90, 0.25, 3)] {
        let cfg = SimConfig { n, p, rho, ..SimConfig::default() };
        let d = generate_dataset(&cfg, seed).unwrap();
        let (xa, xb) = (d.x.slice(s![..n / 2, ..]), d.x.slice(s![n / 2.., ..]));
        let clime = ClimeConfig::from_rates(n, p, 0.5, 2.0);
        let est = clime_pooled(xa, xb, &clime).unwrap();
        for j in 0..p {
            let (ga, gb, sm) = clime_violations(xa, xb, est.theta.row(j), j, est.eta_used[j], est.mu_used[j]);
            assert!(ga <= 1e-6 && gb <= 1e-6 && sm <= 1e-6, "row {j}: {ga} {gb} {sm}");
            let scale = f64::from(1u32 << est.relaxation_rounds[j]);
            assert!((est.eta_used[j] - clime.eta * scale).abs() <= 1e-12 * scale);
        }
    }
}

#[test]
fn tiny_programs_match_vertex_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..15 {
        let p = rng.gen_range(2..=3);
        let m = 4;
        let x = Array2::from_shape_fn((2 * m, p), |_| rng.gen_range(-1.5..1.5));
        let (xa, xb) = (x.slice(s![..m, ..]), x.slice(s![m.., ..]));
        let clime = ClimeConfig {
            eta: rng.gen_range(0.05..0.4),
            mu: rng.gen_range(1.0..3.0),
            ..ClimeConfig::from_rates(2 * m, p, 0.5, 2.0)
        };
        let est = clime_pooled(xa, xb, &clime).unwrap();
        let a = concatenate(Axis(0), &[gram(xa).view(), gram(xb).view(), x.view()]).unwrap();
        for j in 0..p {
            let (eta, mu) = (est.eta_used[j], est.mu_used[j]);
            let centre = Array1::from_shape_fn(a.nrows(), |i| if i < 2 * p && i % p == j { 1.0 } else { 0.0 });
            let width = Array1::from_shape_fn(a.nrows(), |i| if i < 2 * p { eta } else { mu });
            let best = vertex_lp(a.view(), (&centre - &width).view(), (&centre + &width).view())
                .expect("recorded tuning is feasible");
            let l1: f64 = est.theta.row(j).iter().map(|v| v.abs()).sum();
            assert!((l1 - best).abs() <= 1e-5, "row {j}: {l1} vs {best}");
        }
    }
}

#[test]
fn admm_backend_agrees_with_simplex() {
    let cfg = SimConfig { n: 200, p: 20, ..SimConfig::default() };
    let d = generate_dataset(&cfg, 9).unwrap();
    let (xa, xb) = (d.x.slice(s![..100, ..]), d.x.slice(s![100.., ..]));
    let base = ClimeConfig {
        eta: 0.3,
        ..ClimeConfig::from_rates(200, 20, 0.5, 2.0)
    };
    let exact = clime_pooled(xa, xb, &base).unwrap();
    let admm = clime_pooled(
        xa,
        xb,
        &ClimeConfig {
            solver: LpSolver::Admm(AdmmOptions {
                tolerance: 1e-8,
                max_iterations: 100_000,
                ..AdmmOptions::default()
            }),
            ..base.clone()
        },
    )
    .unwrap();
    assert_eq!(exact.relaxation_rounds, admm.relaxation_rounds);
    for j in 0..20 {
        let a: f64 = exact.theta.row(j).iter().map(|v| v.abs()).sum();
        let b: f64 = admm.theta.row(j).iter().map(|v| v.abs()).sum();
        assert!((a - b).abs() <= 1e-4 * a.max(1.0), "row {j}: {a} vs {b}");
    }
}
