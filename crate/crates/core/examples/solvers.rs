//! The estimators behind the test on one simulated data set: Lasso,
//! scaled Lasso, Dantzig selector, and cross-validated logistic Lasso.
//!
//! Run with `cargo run --release --example solvers`.

use ndarray::{s, Array1};
use projection_pursuit::models::Model;
use projection_pursuit::simulate::{generate_dataset, SimConfig};
use projection_pursuit::solvers::{
    cross_validate_logistic, dantzig_selector, lasso_coordinate_descent, lasso_kkt_residual,
    logistic_lambda_grid, logistic_lasso, scaled_lasso, universal_lambda, AdmmOptions, SolverOptions,
};

fn head(b: &Array1<f64>) -> String {
    format!("{:.3}", b.slice(s![..6]))
}

fn main() {
    let cfg = SimConfig {
        n: 150,
        p: 60,
        rho: 0.25,
        ..SimConfig::default()
    };
    let d = generate_dataset(&cfg, 7).unwrap();
    let (x, y) = (d.x.view(), d.y.view());
    let opts = SolverOptions::default();
    println!("truth          {}", head(&cfg.beta_star()));

    let lambda = 0.1;
    let lasso = lasso_coordinate_descent(x, y, lambda, &opts).unwrap();
    println!(
        "lasso          {}  kkt residual {:.1e}",
        head(&lasso.coefficients),
        lasso_kkt_residual(x, y, lasso.coefficients.view(), lambda)
    );

    let lambda0 = universal_lambda(cfg.n, cfg.p);
    let sl = scaled_lasso(x, y, lambda0, &opts).unwrap();
    println!("scaled lasso   {}  sigma {:.3}", head(&sl.coefficients), sl.sigma);

    let dz = dantzig_selector(x, y, lambda0, &AdmmOptions::default()).unwrap();
    println!("dantzig        {}", head(&dz));

    let logit_cfg = SimConfig {
        model: Model::Logistic,
        ..cfg.clone()
    };
    let dl = generate_dataset(&logit_cfg, 7).unwrap();
    let grid = logistic_lambda_grid(dl.x.view(), dl.y.view(), 20, 0.05);
    let cv = cross_validate_logistic(dl.x.view(), dl.y.view(), &grid, 10, 1, &opts).unwrap();
    let fit = logistic_lasso(dl.x.view(), dl.y.view(), cv.lambda, &opts).unwrap();
    println!("logistic (cv)  {}  lambda {:.4}", head(&fit.coefficients), cv.lambda);
}
