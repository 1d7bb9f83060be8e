//! Pooled CLIME precision estimate from two half samples, with the
//! feasibility diagnostics the test reports.
//!
//! Run with `cargo run --release --example clime_precision`.

use ndarray::s;
use projection_pursuit::precision::{clime_pooled, clime_violations, gram_feasibility_bound, ClimeConfig};
use projection_pursuit::simulate::{generate_dataset, toeplitz_covariance, SimConfig};
use projection_pursuit::linalg::spd_inverse;
use projection_pursuit::solvers::SimplexOptions;

fn main() {
    let cfg = SimConfig {
        n: 200,
        p: 40,
        rho: 0.5,
        ..SimConfig::default()
    };
    let d = generate_dataset(&cfg, 3).unwrap();
    let (xa, xb) = (d.x.slice(s![..100, ..]), d.x.slice(s![100.., ..]));

    let clime = ClimeConfig::from_rates(cfg.n, cfg.p, 0.5, 2.0);
    println!("eta = {:.4}, mu = {:.4}", clime.eta, clime.mu);
    println!(
        "column 0 needs eta >= {:.4} on the first half alone",
        gram_feasibility_bound(xa, 0, &SimplexOptions::default()).unwrap()
    );

    let est = clime_pooled(xa, xb, &clime).unwrap();
    println!(
        "relaxation rounds: max {}, rows relaxed {}",
        est.max_relaxation(),
        est.relaxation_rounds.iter().filter(|&&r| r > 0).count()
    );

    let j = 5;
    let (ga, gb, sample) = clime_violations(xa, xb, est.theta.row(j), j, est.eta_used[j], est.mu_used[j]);
    println!("row {j}: violations {ga:.1e} {gb:.1e} {sample:.1e}");

    let truth = spd_inverse(toeplitz_covariance(cfg.p, cfg.rho).unwrap().view()).unwrap();
    println!("row {j} estimate {:.3}", est.theta.slice(s![j, 3..8]));
    println!("row {j} truth    {:.3}", truth.slice(s![j, 3..8]));
}
