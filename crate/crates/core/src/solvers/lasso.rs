use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use super::{soft_threshold, Fit, SolverOptions};
use crate::error::{Error, Result};
use crate::linalg::{ensure_finite_matrix, ensure_finite_vector, gram};

/// Minimizes `0.5 b^T G b - c^T b + lambda ||b||_1` by cyclic coordinate
/// descent with covariance updates.
///
/// Sweeps alternate between a full pass and passes restricted to the
/// current support; the solver stops after a full pass whose largest
/// coordinate move is below `opts.tolerance`.
pub fn quadratic_cd(
    gram: ArrayView2<'_, f64>,
    linear: ArrayView1<'_, f64>,
    lambda: f64,
    opts: &SolverOptions,
) -> Fit {
    let p = linear.len();
    debug_assert_eq!(gram.dim(), (p, p));
    let mut beta = opts
        .warm_start
        .clone()
        .unwrap_or_else(|| Array1::zeros(p));
    let mut grad = gram.dot(&beta) - &linear;

    let mut sweep = |idx: &mut dyn Iterator<Item = usize>, beta: &mut Array1<f64>| -> f64 {
        let mut max_change = 0.0_f64;
        for j in idx {
            let gjj = gram[[j, j]];
            if gjj <= 0.0 {
                continue;
            }
            let old = beta[j];
            let new = soft_threshold(gjj * old - grad[j], lambda) / gjj;
            let delta = new - old;
            if delta != 0.0 {
                beta[j] = new;
                grad.scaled_add(delta, &gram.column(j));
                max_change = max_change.max(delta.abs());
            }
        }
        max_change
    };

    let mut iterations = 0;
    let mut converged = false;
    'outer: while iterations < opts.max_iterations {
        let change = sweep(&mut (0..p), &mut beta);
        iterations += 1;
        if change < opts.tolerance {
            converged = true;
            break;
        }
        loop {
            if iterations >= opts.max_iterations {
                break 'outer;
            }
            let active: Vec<usize> = (0..p).filter(|&j| beta[j] != 0.0).collect();
            let change = sweep(&mut active.into_iter(), &mut beta);
            iterations += 1;
            if change < opts.tolerance {
                break;
            }
        }
    }

    Fit {
        coefficients: beta,
        iterations,
        converged,
    }
}

/// Largest violation of the optimality conditions of the quadratic problem
/// solved by [`quadratic_cd`].
pub fn quadratic_kkt_residual(
    gram: ArrayView2<'_, f64>,
    linear: ArrayView1<'_, f64>,
    beta: ArrayView1<'_, f64>,
    lambda: f64,
) -> f64 {
    let neg_grad = &linear - &gram.dot(&beta);
    kkt_from_correlations(neg_grad.view(), beta, lambda)
}

fn kkt_from_correlations(corr: ArrayView1<'_, f64>, beta: ArrayView1<'_, f64>, lambda: f64) -> f64 {
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

fn check_regression(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> Result<()> {
    ensure_finite_matrix(x, "design")?;
    ensure_finite_vector(y, "response")?;
    if x.nrows() != y.len() {
        return Err(Error::dim(format!(
            "design has {} rows but response has length {}",
            x.nrows(),
            y.len()
        )));
    }
    Ok(())
}

/// Lasso: minimizes `(2n)^-1 ||y - X b||^2 + lambda ||b||_1`.
pub fn lasso_coordinate_descent(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<Fit> {
    check_regression(x, y)?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::input(format!("lambda must be positive, got {lambda}")));
    }
    opts.validate(x.ncols())?;
    let g = gram(x);
    let c = x.t().dot(&y) / x.nrows() as f64;
    Ok(quadratic_cd(g.view(), c.view(), lambda, opts))
}

/// `max_j` violation of the Lasso KKT conditions at `beta`.
pub fn lasso_kkt_residual(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    beta: ArrayView1<'_, f64>,
    lambda: f64,
) -> f64 {
    let resid = &y - &x.dot(&beta);
    let corr = x.t().dot(&resid) / x.nrows() as f64;
    kkt_from_correlations(corr.view(), beta, lambda)
}

/// Solutions `a(t)` of `min_a ||r + D a||^2 + t ||a||_1` over a decreasing grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoPath {
    pub grid: Vec<f64>,
    pub solutions: Vec<Array1<f64>>,
    pub converged: bool,
}

/// Warm-started coordinate descent down a strictly decreasing grid.
///
/// Note the sign convention: `response` enters with a plus sign, so at
/// `t -> 0` the solution drives `r + D a` towards zero.
pub fn lasso_path(
    response: ArrayView1<'_, f64>,
    design: ArrayView2<'_, f64>,
    grid: &[f64],
    opts: &SolverOptions,
) -> Result<LassoPath> {
    check_regression(design, response)?;
    if grid.is_empty() {
        return Err(Error::input("lasso path grid is empty"));
    }
    if grid.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(Error::input("lasso path grid must be positive and finite"));
    }
    if grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::input("lasso path grid must be strictly decreasing"));
    }
    opts.validate(design.ncols())?;
    let (g, c) = path_quadratic(response, design);
    let mut run = opts.clone();
    let mut solutions = Vec::with_capacity(grid.len());
    let mut converged = true;
    for &t in grid {
        let fit = quadratic_cd(g.view(), c.view(), t, &run);
        converged &= fit.converged;
        run.warm_start = Some(fit.coefficients.clone());
        solutions.push(fit.coefficients);
    }
    Ok(LassoPath {
        grid: grid.to_vec(),
        solutions,
        converged,
    })
}

/// `||r + D a||^2 = a^T (D^T D) a + 2 r^T D a + const`, i.e. Gram `2 D^T D`
/// and linear term `-2 D^T r` in the form used by [`quadratic_cd`].
pub(crate) fn path_quadratic(
    response: ArrayView1<'_, f64>,
    design: ArrayView2<'_, f64>,
) -> (Array2<f64>, Array1<f64>) {
    let g = design.t().dot(&design) * 2.0;
    let c = design.t().dot(&response) * -2.0;
    (g, c)
}
