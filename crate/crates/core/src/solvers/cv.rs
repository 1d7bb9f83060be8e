use ndarray::{Array1, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{logistic_lasso, SolverOptions};
use crate::error::{Error, Result};
use crate::linalg::max_abs;
use crate::models::logistic_link;

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub lambda: f64,
    /// Pooled held-out mean negative log-likelihood, aligned with `grid`.
    pub deviance: Vec<f64>,
    pub grid: Vec<f64>,
}

/// Log-spaced grid from the smallest penalty that zeroes every coefficient
/// down to `min_ratio` times it.
pub fn logistic_lambda_grid(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    len: usize,
    min_ratio: f64,
) -> Vec<f64> {
    let n = x.nrows() as f64;
    let centered = y.mapv(|v| 0.5 - v);
    let lmax = max_abs((x.t().dot(&centered) / n).view()).max(1e-8);
    if len <= 1 {
        return vec![lmax];
    }
    let step = min_ratio.ln() / (len - 1) as f64;
    (0..len).map(|k| lmax * (step * k as f64).exp()).collect()
}

fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut fold = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % k;
    }
    fold
}

/// K-fold cross-validation of the l1-penalized logistic regression.
///
/// Each training fold is fitted along the grid (largest penalty first, warm
/// started). The selected penalty minimizes the pooled held-out negative
/// log-likelihood; ties go to the larger penalty.
pub fn cross_validate_logistic(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    grid: &[f64],
    k: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<CvResult> {
    if grid.is_empty() {
        return Err(Error::input("cross-validation grid is empty"));
    }
    if k < 2 {
        return Err(Error::input(format!("need at least 2 folds, got {k}")));
    }
    let n = x.nrows();
    if n != y.len() {
        return Err(Error::dim("design rows and response length differ"));
    }
    if k > n {
        return Err(Error::input(format!("{k} folds requested for {n} observations")));
    }
    if grid.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
        return Err(Error::input("penalties must be positive and finite"));
    }
    if grid.len() == 1 {
        return Ok(CvResult {
            lambda: grid[0],
            deviance: vec![f64::NAN],
            grid: grid.to_vec(),
        });
    }

    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| grid[b].total_cmp(&grid[a]));

    let folds = fold_assignment(n, k, seed);
    let mut total = vec![0.0; grid.len()];
    for f in 0..k {
        let train: Vec<usize> = (0..n).filter(|&i| folds[i] != f).collect();
        let test: Vec<usize> = (0..n).filter(|&i| folds[i] == f).collect();
        let xt = x.select(Axis(0), &train);
        let yt = y.select(Axis(0), &train);
        let xv = x.select(Axis(0), &test);
        let yv = y.select(Axis(0), &test);
        let mut run = opts.clone();
        run.warm_start = None;
        for &g in &order {
            let fit = logistic_lasso(xt.view(), yt.view(), grid[g], &run)?;
            let eta: Array1<f64> = xv.dot(&fit.coefficients);
            total[g] += eta
                .iter()
                .zip(yv.iter())
                .map(|(&e, &yi)| -yi * e + logistic_link(e).0)
                .sum::<f64>();
            run.warm_start = Some(fit.coefficients);
        }
    }
    let deviance: Vec<f64> = total.iter().map(|t| t / n as f64).collect();

    // walk from the largest penalty so strict improvement is needed to move
    let mut best = order[0];
    for &g in &order[1..] {
        if deviance[g] < deviance[best] {
            best = g;
        }
    }
    Ok(CvResult {
        lambda: grid[best],
        deviance,
        grid: grid.to_vec(),
    })
}
