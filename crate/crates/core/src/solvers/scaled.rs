use ndarray::{Array1, ArrayView1, ArrayView2};

use super::{quadratic_cd, Fit, SolverOptions};
use crate::error::{Error, Result};
use crate::linalg::{ensure_finite_matrix, ensure_finite_vector, gram};

/// Scaled Lasso estimate: coefficients plus a noise-level estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledLassoFit {
    pub coefficients: Array1<f64>,
    pub sigma: f64,
    /// Alternation rounds performed.
    pub rounds: usize,
    pub converged: bool,
    /// The residual norm fell to the floor (zero response or exact fit).
    pub degenerate: bool,
    pub sigma_floor: f64,
}

/// `sqrt(2 log p / n)`.
pub fn universal_lambda(n: usize, p: usize) -> f64 {
    (2.0 * (p.max(2) as f64).ln() / n as f64).sqrt()
}

const MAX_ROUNDS: usize = 200;
const SIGMA_TOL: f64 = 1e-9;

/// Alternates a Lasso step at penalty `sigma * lambda0` with the update
/// `sigma = ||y - X b||_2 / sqrt(n)` until `sigma` settles.
///
/// The fixed point is the joint minimizer of
/// `||y - X b||^2 / (2 n sigma) + sigma / 2 + lambda0 ||b||_1`.
pub fn scaled_lasso(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    lambda0: f64,
    opts: &SolverOptions,
) -> Result<ScaledLassoFit> {
    ensure_finite_matrix(x, "design")?;
    ensure_finite_vector(y, "response")?;
    let n = x.nrows();
    if n != y.len() {
        return Err(Error::dim(format!(
            "design has {n} rows but response has length {}",
            y.len()
        )));
    }
    if n < 2 {
        return Err(Error::input("scaled lasso needs at least two observations"));
    }
    if !(lambda0 > 0.0 && lambda0.is_finite()) {
        return Err(Error::input(format!("lambda0 must be positive, got {lambda0}")));
    }
    opts.validate(x.ncols())?;

    let root_n = (n as f64).sqrt();
    let y_scale = y.dot(&y).sqrt() / root_n;
    let floor = (1e-4 * y_scale).max(1e-12);
    let p = x.ncols();

    if y_scale <= floor {
        return Ok(ScaledLassoFit {
            coefficients: Array1::zeros(p),
            sigma: floor,
            rounds: 0,
            converged: true,
            degenerate: true,
            sigma_floor: floor,
        });
    }

    let g = gram(x);
    let c = x.t().dot(&y) / n as f64;
    let mut sigma = y_scale;
    let mut run = opts.clone();
    let mut fit = Fit {
        coefficients: run.warm_start.clone().unwrap_or_else(|| Array1::zeros(p)),
        iterations: 0,
        converged: true,
    };
    let mut rounds = 0;
    let mut converged = false;
    let mut degenerate = false;
    while rounds < MAX_ROUNDS {
        rounds += 1;
        fit = quadratic_cd(g.view(), c.view(), sigma * lambda0, &run);
        run.warm_start = Some(fit.coefficients.clone());
        let resid = &y - &x.dot(&fit.coefficients);
        let raw = resid.dot(&resid).sqrt() / root_n;
        let next = raw.max(floor);
        let change = (next - sigma).abs();
        sigma = next;
        if raw <= floor {
            degenerate = true;
        }
        if change < SIGMA_TOL * sigma.max(1.0) {
            converged = fit.converged;
            break;
        }
    }
    Ok(ScaledLassoFit {
        coefficients: fit.coefficients,
        sigma,
        rounds,
        converged,
        degenerate,
        sigma_floor: floor,
    })
}
