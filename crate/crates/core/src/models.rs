//! Loss gradients (scores) for the supported regression models.
//!
//! Scores follow the gradient-of-loss convention `s(z, b) = d l(z, b) / d b`,
//! so the linear score is `x (x^T b - y)` and the logistic score is
//! `x (b'(x^T b) - y)`.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Linear,
    Logistic,
}

impl Model {
    /// Derivative of the per-observation loss with respect to the linear
    /// predictor, `dl/d(x^T b)`.
    pub fn residual(self, eta: f64, y: f64) -> f64 {
        match self {
            Model::Linear => eta - y,
            Model::Logistic => logistic_link(eta).1 - y,
        }
    }

    /// Per-observation loss.
    pub fn loss(self, eta: f64, y: f64) -> f64 {
        match self {
            Model::Linear => 0.5 * (y - eta) * (y - eta),
            Model::Logistic => -y * eta + logistic_link(eta).0,
        }
    }

    /// Second derivative of the loss in the linear predictor.
    pub fn hessian_weight(self, eta: f64) -> f64 {
        match self {
            Model::Linear => 1.0,
            Model::Logistic => logistic_link(eta).2,
        }
    }

    pub fn score(self, x: ArrayView1<'_, f64>, y: f64, beta: ArrayView1<'_, f64>) -> Array1<f64> {
        let r = self.residual(x.dot(&beta), y);
        x.mapv(|v| v * r)
    }

    /// Scores of every observation stacked as rows (`n x p`).
    pub fn scores(self, x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, beta: ArrayView1<'_, f64>) -> Array2<f64> {
        let eta = x.dot(&beta);
        let mut s = x.to_owned();
        for (i, mut row) in s.rows_mut().into_iter().enumerate() {
            let r = self.residual(eta[i], y[i]);
            row.mapv_inplace(|v| v * r);
        }
        s
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Linear => "linear",
            Model::Logistic => "logistic",
        })
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(Model::Linear),
            "logistic" | "logit" => Ok(Model::Logistic),
            other => Err(Error::input(format!("unknown model '{other}'"))),
        }
    }
}

/// `(b(u), b'(u), b''(u))` for `b(u) = log(1 + e^u)`, evaluated without
/// overflow for any finite `u`.
pub fn logistic_link(u: f64) -> (f64, f64, f64) {
    // e = exp(-|u|) lies in (0, 1]
    let e = (-u.abs()).exp();
    let b = u.max(0.0) + e.ln_1p();
    let b1 = if u >= 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
    let b2 = e / ((1.0 + e) * (1.0 + e));
    (b, b1, b2)
}

pub fn linear_score(x: ArrayView1<'_, f64>, y: f64, beta: ArrayView1<'_, f64>) -> Array1<f64> {
    Model::Linear.score(x, y, beta)
}

pub fn logistic_score(x: ArrayView1<'_, f64>, y: f64, beta: ArrayView1<'_, f64>) -> Array1<f64> {
    Model::Logistic.score(x, y, beta)
}
