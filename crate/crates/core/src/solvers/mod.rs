//! Sparse l1-regularized regression solvers.
//!
//! Every solver here is a pure function of its inputs. The least-squares
//! solvers share one coordinate-descent kernel that works on the Gram
//! matrix, so callers that solve many related problems (scaled Lasso,
//! node-wise regressions, Lasso paths) can pay for `X^T X` once.

mod admm;
mod cv;
mod lasso;
mod logistic;
mod scaled;
mod simplex;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

pub use admm::{dantzig_selector, l1_box_admm, AdmmOptions, BoxLp, BoxLpSolution};
pub use cv::{cross_validate_logistic, logistic_lambda_grid, CvResult};
pub use lasso::{
    lasso_coordinate_descent, lasso_kkt_residual, lasso_path, quadratic_cd,
    quadratic_kkt_residual, LassoPath,
};
pub use logistic::{logistic_kkt_residual, logistic_lasso, logistic_objective};
pub use scaled::{scaled_lasso, universal_lambda, ScaledLassoFit};
pub use simplex::{box_violation, l1_box_simplex, LpStatus, SimplexOptions, SimplexSolution};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Sup-norm change of the coefficients over one sweep below which the
    /// solver stops.
    pub tolerance: f64,
    #[serde(skip)]
    pub warm_start: Option<Array1<f64>>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            tolerance: 1e-10,
            warm_start: None,
        }
    }
}

impl SolverOptions {
    pub fn with_warm_start(mut self, start: Array1<f64>) -> Self {
        self.warm_start = Some(start);
        self
    }

    pub(crate) fn validate(&self, p: usize) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::input("max_iterations must be at least 1"));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::input("tolerance must be positive and finite"));
        }
        if let Some(w) = &self.warm_start {
            if w.len() != p {
                return Err(Error::dim(format!(
                    "warm start has length {}, expected {p}",
                    w.len()
                )));
            }
        }
        Ok(())
    }
}

/// Coefficients returned by an iterative solver together with its
/// convergence record.
#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub coefficients: Array1<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// `sign(x) * max(|x| - t, 0)`.
#[inline]
pub fn soft_threshold(x: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(1.0, 1.0), 0.0);
        assert_eq!(soft_threshold(2.5, 0.0), 2.5);
    }
}
