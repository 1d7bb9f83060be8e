use ndarray::{Array1, ArrayView1, ArrayView2};

use super::{soft_threshold, Fit, SolverOptions};
use crate::error::{Error, Result};
use crate::linalg::{ensure_finite_matrix, ensure_finite_vector};
use crate::models::logistic_link;

const INNER_SWEEPS: usize = 1_000;
const WEIGHT_FLOOR: f64 = 1e-10;

/// `n^-1 sum [-y_i x_i^T b + log(1 + exp(x_i^T b))] + lambda ||b||_1`.
pub fn logistic_objective(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    beta: ArrayView1<'_, f64>,
    lambda: f64,
) -> f64 {
    let eta = x.dot(&beta);
    let loss: f64 = eta
        .iter()
        .zip(y.iter())
        .map(|(&e, &yi)| -yi * e + logistic_link(e).0)
        .sum::<f64>()
        / x.nrows() as f64;
    loss + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// Largest violation of `|X_j^T (b'(X b) - y) / n| <= lambda` (with equality
/// and matching sign on the support).
pub fn logistic_kkt_residual(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    beta: ArrayView1<'_, f64>,
    lambda: f64,
) -> f64 {
    let eta = x.dot(&beta);
    let resid = Array1::from_iter(eta.iter().zip(y.iter()).map(|(&e, &yi)| yi - logistic_link(e).1));
    let corr = x.t().dot(&resid) / x.nrows() as f64;
    corr.iter()
        .zip(beta.iter())
        .map(|(&g, &b)| {
            if b > 0.0 {
                (g - lambda).abs()
            } else if b < 0.0 {
                (g + lambda).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// l1-penalized logistic regression (every coordinate penalized).
///
/// Proximal Newton: each outer step builds the weighted quadratic model of
/// the loss, minimizes model + penalty by coordinate descent on the working
/// residual, then backtracks along the step until the true objective
/// decreases.
pub fn logistic_lasso(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<Fit> {
    ensure_finite_matrix(x, "design")?;
    ensure_finite_vector(y, "response")?;
    let (n, p) = x.dim();
    if n != y.len() {
        return Err(Error::dim(format!(
            "design has {n} rows but response has length {}",
            y.len()
        )));
    }
    if let Some(bad) = y.iter().find(|v| **v != 0.0 && **v != 1.0) {
        return Err(Error::input(format!("logistic response must be 0/1, found {bad}")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::input(format!("lambda must be positive, got {lambda}")));
    }
    opts.validate(p)?;

    let nf = n as f64;
    let mut beta = opts.warm_start.clone().unwrap_or_else(|| Array1::zeros(p));
    let mut objective = logistic_objective(x, y, beta.view(), lambda);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iterations {
        iterations += 1;
        let eta = x.dot(&beta);
        let mut weights = Array1::<f64>::zeros(n);
        // working residual r_i = w_i (z_i - x_i^T b) = y_i - b'(eta_i)
        let mut resid = Array1::<f64>::zeros(n);
        for i in 0..n {
            let (_, b1, b2) = logistic_link(eta[i]);
            weights[i] = b2.max(WEIGHT_FLOOR);
            resid[i] = y[i] - b1;
        }
        let curvature: Vec<f64> = (0..p)
            .map(|j| {
                let col = x.column(j);
                col.iter().zip(weights.iter()).map(|(v, w)| w * v * v).sum::<f64>() / nf
            })
            .collect();

        let mut cand = beta.clone();
        let sweep = |idx: &[usize], cand: &mut Array1<f64>, resid: &mut Array1<f64>| -> f64 {
            let mut max_change = 0.0_f64;
            for &j in idx {
                let hjj = curvature[j];
                if hjj <= 0.0 {
                    continue;
                }
                let col = x.column(j);
                let corr = col.dot(resid) / nf;
                let old = cand[j];
                let new = soft_threshold(hjj * old + corr, lambda) / hjj;
                let delta = new - old;
                if delta != 0.0 {
                    cand[j] = new;
                    for i in 0..n {
                        resid[i] -= weights[i] * col[i] * delta;
                    }
                    max_change = max_change.max(delta.abs());
                }
            }
            max_change
        };
        let all: Vec<usize> = (0..p).collect();
        let inner_tol = opts.tolerance * 1e-2;
        let mut inner = 0;
        loop {
            let change = sweep(&all, &mut cand, &mut resid);
            inner += 1;
            if change < inner_tol || inner >= INNER_SWEEPS {
                break;
            }
            loop {
                let active: Vec<usize> = (0..p).filter(|&j| cand[j] != 0.0).collect();
                let change = sweep(&active, &mut cand, &mut resid);
                inner += 1;
                if change < inner_tol || inner >= INNER_SWEEPS {
                    break;
                }
            }
        }

        let direction = &cand - &beta;
        let step_size = direction.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
        if step_size < opts.tolerance {
            converged = true;
            break;
        }
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial = &beta + &(&direction * step);
            let f = logistic_objective(x, y, trial.view(), lambda);
            if f <= objective + 1e-15 * objective.abs().max(1.0) {
                beta = trial;
                objective = f;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // no descent available at machine precision
            converged = step_size * step < opts.tolerance * 1e3;
            break;
        }
        if step * step_size < opts.tolerance {
            converged = true;
            break;
        }
    }

    Ok(Fit {
        coefficients: beta,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn instance(n: usize, p: usize, seed: u64) -> (Array2<f64>, Array1<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, p), |_| rng.gen_range(-1.5..1.5));
        let y = Array1::from_shape_fn(n, |i| {
            let e: f64 = x[[i, 0]] * 1.5 - x[[i, 1]];
            if rng.gen::<f64>() < 1.0 / (1.0 + (-e).exp()) { 1.0 } else { 0.0 }
        });
        (x, y)
    }

    /// Proximal gradient with a fixed 1/L step, L = ||X||_F^2 / (4n).
    fn prox_gradient(x: &Array2<f64>, y: &Array1<f64>, lambda: f64, iters: usize) -> Array1<f64> {
        let n = x.nrows() as f64;
        let l = x.iter().map(|v| v * v).sum::<f64>() / (4.0 * n);
        let step = 1.0 / l;
        let mut b = Array1::<f64>::zeros(x.ncols());
        for _ in 0..iters {
            let eta = x.dot(&b);
            let r = Array1::from_iter(eta.iter().zip(y.iter()).map(|(&e, &yi)| 1.0 / (1.0 + (-e).exp()) - yi));
            let g = x.t().dot(&r) / n;
            b = (&b - &(g * step)).mapv(|v| soft_threshold(v, step * lambda));
        }
        b
    }

    #[test]
    fn zero_at_large_lambda() {
        let (x, y) = instance(40, 5, 3);
        let half = Array1::from_elem(40, 0.5);
        let lmax = (x.t().dot(&(&half - &y)) / 40.0).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let fit = logistic_lasso(x.view(), y.view(), lmax * 1.0001, &SolverOptions::default()).unwrap();
        assert!(fit.coefficients.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn kkt_and_oracle_agreement() {
        let (x, y) = instance(60, 6, 9);
        let lambda = 0.02;
        let fit = logistic_lasso(x.view(), y.view(), lambda, &SolverOptions::default()).unwrap();
        assert!(fit.converged);
        assert!(logistic_kkt_residual(x.view(), y.view(), fit.coefficients.view(), lambda) < 1e-6);
        let oracle = prox_gradient(&x, &y, lambda, 100_000);
        for j in 0..6 {
            assert!((fit.coefficients[j] - oracle[j]).abs() < 1e-5);
        }
    }

    #[test]
    fn separable_data_stays_finite() {
        let x = array![[1.0], [2.0], [-1.0], [-2.0]];
        let y = array![1.0, 1.0, 0.0, 0.0];
        let fit = logistic_lasso(x.view(), y.view(), 1e-3, &SolverOptions::default()).unwrap();
        assert!(fit.coefficients[0].is_finite() && fit.coefficients[0] > 1.0);
    }

    #[test]
    fn rejects_non_binary_labels() {
        let x = array![[1.0], [2.0]];
        let y = array![1.0, 0.5];
        assert!(logistic_lasso(x.view(), y.view(), 0.1, &SolverOptions::default())
            .unwrap_err()
            .is_input());
    }
}
