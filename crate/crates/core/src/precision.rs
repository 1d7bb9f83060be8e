//! Inverse-Hessian (precision matrix) estimates used for bias correction.
//!
//! * Linear model: a pooled CLIME-type estimator. Column `j` minimizes
//!   `||theta||_1` subject to `||S_A theta - e_j||_inf <= eta`,
//!   `||S_B theta - e_j||_inf <= eta` and `||X theta||_inf <= mu`, where
//!   `S_A`, `S_B` are the half-sample Gram matrices and `X` the full design.
//! * Logistic model: node-wise Lasso on the curvature-weighted design.
//!
//! Rows of the returned matrix are the per-coordinate solutions.

use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite_matrix, gram, l1_norm};
use crate::models::logistic_link;
use crate::solvers::{
    l1_box_admm, l1_box_simplex, quadratic_cd, AdmmOptions, BoxLp, LpStatus, SimplexOptions, SolverOptions,
};

#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionEstimate {
    /// `p x p`; row `j` is the estimate for coordinate `j`.
    pub theta: Array2<f64>,
    /// Largest constraint violation per row at the tuning actually used.
    pub feasibility_residuals: Vec<f64>,
    /// Number of times the tuning was doubled for each row.
    pub relaxation_rounds: Vec<usize>,
    /// Box width on the Gram constraints (or node-wise penalty) per row.
    pub eta_used: Vec<f64>,
    /// Box width on `||X theta||_inf` per row (CLIME only).
    pub mu_used: Vec<f64>,
}

impl PrecisionEstimate {
    pub fn max_relaxation(&self) -> usize {
        self.relaxation_rounds.iter().copied().max().unwrap_or(0)
    }
}

/// Linear-program backend for the CLIME columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum LpSolver {
    /// Exact dual simplex, one column at a time.
    Simplex(SimplexOptions),
    /// Over-relaxed ADMM on all columns at once.
    Admm(AdmmOptions),
}

impl Default for LpSolver {
    fn default() -> Self {
        LpSolver::Simplex(SimplexOptions::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClimeConfig {
    pub eta: f64,
    pub mu: f64,
    pub solver: LpSolver,
    pub max_relaxations: usize,
    /// Skip relaxation rounds that [`gram_feasibility_bound`] proves
    /// infeasible (simplex backend only).
    pub screen: bool,
}

impl ClimeConfig {
    /// `eta = eta_const * sqrt(log p / n)`, `mu = mu_const * sqrt(log(max(p, n)))`.
    pub fn from_rates(n: usize, p: usize, eta_const: f64, mu_const: f64) -> Self {
        let lp = (p.max(2) as f64).ln();
        Self {
            eta: eta_const * (lp / n as f64).sqrt(),
            mu: mu_const * (p.max(n).max(2) as f64).ln().sqrt(),
            solver: LpSolver::default(),
            max_relaxations: 5,
            screen: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.mu > 0.0 && self.eta.is_finite() && self.mu.is_finite()) {
            return Err(Error::input(format!(
                "CLIME tuning must be positive, got eta = {}, mu = {}",
                self.eta, self.mu
            )));
        }
        Ok(())
    }
}

/// Row-wise constraint violations of a CLIME solution in original units:
/// `(gram_a, gram_b, sample)` for row `j` of `theta`.
pub fn clime_violations(
    x_a: ArrayView2<'_, f64>,
    x_b: ArrayView2<'_, f64>,
    theta_row: ArrayView1<'_, f64>,
    j: usize,
    eta: f64,
    mu: f64,
) -> (f64, f64, f64) {
    let gram_violation = |x: ArrayView2<'_, f64>| {
        let xt = x.dot(&theta_row);
        let st = x.t().dot(&xt) / x.nrows() as f64;
        st.iter()
            .enumerate()
            .map(|(k, v)| (v - if k == j { 1.0 } else { 0.0 }).abs() - eta)
            .fold(0.0_f64, f64::max)
    };
    let xa = x_a.dot(&theta_row);
    let xb = x_b.dot(&theta_row);
    let sample = xa
        .iter()
        .chain(xb.iter())
        .map(|v| v.abs() - mu)
        .fold(0.0_f64, f64::max);
    (gram_violation(x_a), gram_violation(x_b), sample)
}

/// Largest `eta` for which `||X^T X theta / m - e_j||_inf <= eta` is
/// certifiably infeasible, namely `max { y_j / ||y||_1 : X y = 0 }`.
///
/// This is `1 / (1 + min ||y_-j||_1)` over `X_-j y_-j = -x_j`, or zero when
/// no such `y` exists (for instance when `X` has at least `p` independent
/// rows). Any `eta` strictly below the returned value is infeasible for
/// the pooled CLIME program as well.
pub fn gram_feasibility_bound(x: ArrayView2<'_, f64>, j: usize, opts: &SimplexOptions) -> Result<f64> {
    let p = x.ncols();
    if j >= p {
        return Err(Error::dim(format!("column {j} out of range for {p} columns")));
    }
    if x.nrows() >= p || p < 2 {
        return Ok(0.0);
    }
    let others: Vec<usize> = (0..p).filter(|&k| k != j).collect();
    let a = x.select(Axis(1), &others);
    let target = x.column(j).mapv(|v| -v);
    let lazy = vec![false; x.nrows()];
    let sol = l1_box_simplex(a.view(), target.view(), target.view(), &lazy, opts)?;
    Ok(match sol.status {
        LpStatus::Optimal => 1.0 / (1.0 + l1_norm(sol.theta.view())),
        _ => 0.0,
    })
}

/// Pooled CLIME-type estimate from the two half samples.
///
/// A column whose program is infeasible (or does not converge) is re-solved
/// with `eta` and `mu` doubled, up to `cfg.max_relaxations` times.
pub fn clime_pooled(
    x_a: ArrayView2<'_, f64>,
    x_b: ArrayView2<'_, f64>,
    cfg: &ClimeConfig,
) -> Result<PrecisionEstimate> {
    ensure_finite_matrix(x_a, "first half design")?;
    ensure_finite_matrix(x_b, "second half design")?;
    cfg.validate()?;
    let p = x_a.ncols();
    if x_b.ncols() != p {
        return Err(Error::dim(format!(
            "half samples have {} and {} columns",
            p,
            x_b.ncols()
        )));
    }
    let s_a = gram(x_a);
    let s_b = gram(x_b);
    let x = concatenate(Axis(0), &[x_a.view(), x_b.view()]).expect("equal column counts");
    let a = concatenate(Axis(0), &[s_a.view(), s_b.view(), x.view()]).expect("equal column counts");
    match &cfg.solver {
        LpSolver::Simplex(opts) => clime_simplex(a.view(), x_a, x_b, cfg, opts),
        LpSolver::Admm(opts) => clime_admm(a.view(), cfg, opts),
    }
}

struct ColumnFit {
    row: Array1<f64>,
    violation: f64,
    round: usize,
    eta: f64,
    mu: f64,
}

fn clime_simplex(
    a: ArrayView2<'_, f64>,
    x_a: ArrayView2<'_, f64>,
    x_b: ArrayView2<'_, f64>,
    cfg: &ClimeConfig,
    opts: &SimplexOptions,
) -> Result<PrecisionEstimate> {
    let p = a.ncols();
    let k = a.nrows();
    let lazy = vec![true; k];
    let fits: Vec<Result<ColumnFit>> = (0..p)
        .into_par_iter()
        .map(|j| {
            let floor = if cfg.screen {
                gram_feasibility_bound(x_a, j, opts)?.max(gram_feasibility_bound(x_b, j, opts)?)
            } else {
                0.0
            };
            let mut lower = Array1::<f64>::zeros(k);
            let mut upper = Array1::<f64>::zeros(k);
            let mut last = (LpStatus::Infeasible, f64::INFINITY);
            for round in 0..=cfg.max_relaxations {
                let scale = f64::from(1u32 << round.min(30));
                let (eta, mu) = (cfg.eta * scale, cfg.mu * scale);
                // certified infeasible: strictly below the bound
                if eta < floor * (1.0 - 1e-9) {
                    last = (LpStatus::Infeasible, floor - eta);
                    continue;
                }
                for i in 0..k {
                    let (b, w) = if i < 2 * p {
                        (if i % p == j { 1.0 } else { 0.0 }, eta)
                    } else {
                        (0.0, mu)
                    };
                    lower[i] = b - w;
                    upper[i] = b + w;
                }
                let sol = l1_box_simplex(a.view(), lower.view(), upper.view(), &lazy, opts)?;
                if sol.status == LpStatus::Optimal {
                    return Ok(ColumnFit {
                        row: sol.theta,
                        violation: sol.violation,
                        round,
                        eta,
                        mu,
                    });
                }
                last = (sol.status, sol.violation);
            }
            Err(Error::PrecisionColumn {
                column: j,
                reason: format!(
                    "no feasible solution after {} relaxations (eta = {:e}, mu = {:e}, last status {:?}, \
                     violation {:e}, infeasibility bound {floor:e})",
                    cfg.max_relaxations,
                    cfg.eta * f64::from(1u32 << cfg.max_relaxations.min(30)),
                    cfg.mu * f64::from(1u32 << cfg.max_relaxations.min(30)),
                    last.0,
                    last.1
                ),
            })
        })
        .collect();
    let mut theta = Array2::<f64>::zeros((p, p));
    let mut residuals = vec![0.0; p];
    let mut rounds = vec![0; p];
    let mut eta_used = vec![cfg.eta; p];
    let mut mu_used = vec![cfg.mu; p];
    for (j, fit) in fits.into_iter().enumerate() {
        let fit = fit?;
        theta.row_mut(j).assign(&fit.row);
        residuals[j] = fit.violation;
        rounds[j] = fit.round;
        eta_used[j] = fit.eta;
        mu_used[j] = fit.mu;
    }
    Ok(PrecisionEstimate {
        theta,
        feasibility_residuals: residuals,
        relaxation_rounds: rounds,
        eta_used,
        mu_used,
    })
}

fn clime_admm(a: ArrayView2<'_, f64>, cfg: &ClimeConfig, opts: &AdmmOptions) -> Result<PrecisionEstimate> {
    let p = a.ncols();
    let k = a.nrows();
    let eye = Array2::<f64>::eye(p);
    let mut full_rhs = Array2::<f64>::zeros((k, p));
    full_rhs.slice_mut(s![..p, ..]).assign(&eye);
    full_rhs.slice_mut(s![p..2 * p, ..]).assign(&eye);

    let mut theta = Array2::<f64>::zeros((p, p));
    let mut residuals = vec![0.0; p];
    let mut rounds = vec![0; p];
    let mut eta_used = vec![cfg.eta; p];
    let mut mu_used = vec![cfg.mu; p];

    let mut pending: Vec<usize> = (0..p).collect();
    let (mut eta, mut mu) = (cfg.eta, cfg.mu);
    for round in 0..=cfg.max_relaxations {
        let widths = Array1::from_iter((0..k).map(|i| if i < 2 * p { eta } else { mu }));
        let rhs = full_rhs.select(Axis(1), &pending);
        let sol = l1_box_admm(
            &BoxLp {
                a: a.view(),
                rhs: rhs.view(),
                widths: widths.view(),
            },
            opts,
        )?;
        let mut still = Vec::new();
        for (c, &j) in pending.iter().enumerate() {
            if sol.converged[c] {
                theta.row_mut(j).assign(&sol.theta.column(c));
                residuals[j] = sol.violation[c];
                rounds[j] = round;
                eta_used[j] = eta;
                mu_used[j] = mu;
            } else {
                still.push((j, sol.violation[c]));
            }
        }
        if still.is_empty() {
            return Ok(PrecisionEstimate {
                theta,
                feasibility_residuals: residuals,
                relaxation_rounds: rounds,
                eta_used,
                mu_used,
            });
        }
        if round == cfg.max_relaxations {
            let (j, v) = still[0];
            return Err(Error::PrecisionColumn {
                column: j,
                reason: format!(
                    "no feasible solution after {} relaxations (eta = {eta:e}, mu = {mu:e}, \
                     violation {v:e}); {} rows affected",
                    cfg.max_relaxations,
                    still.len()
                ),
            });
        }
        pending = still.into_iter().map(|(j, _)| j).collect();
        eta *= 2.0;
        mu *= 2.0;
    }
    unreachable!("relaxation loop always returns")
}

/// Scales row `i` of `x` by `sqrt(b''(x_i^T beta))`.
pub fn weighted_design(x: ArrayView2<'_, f64>, beta: ArrayView1<'_, f64>) -> Array2<f64> {
    let eta = x.dot(&beta);
    let mut u = x.to_owned();
    for (mut row, e) in u.rows_mut().into_iter().zip(eta.iter()) {
        let w = logistic_link(*e).2.sqrt();
        row.mapv_inplace(|v| v * w);
    }
    u
}

const NODEWISE_DENOMINATOR_FLOOR: f64 = 1e-10;

/// Node-wise Lasso: regress each column of `u` on the others with penalty
/// `eta` and assemble `Theta_jj = 1 / (U_j^T (U_j - U_-j gamma_j) / m)`,
/// `Theta_j,-j = -Theta_jj gamma_j`.
pub fn nodewise_precision(
    u: ArrayView2<'_, f64>,
    eta: f64,
    opts: &SolverOptions,
) -> Result<PrecisionEstimate> {
    ensure_finite_matrix(u, "weighted design")?;
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::input(format!("node-wise penalty must be positive, got {eta}")));
    }
    let p = u.ncols();
    let g = gram(u);
    let rows: Vec<Result<(Array1<f64>, f64)>> = (0..p)
        .into_par_iter()
        .map(|j| nodewise_row(g.view(), j, eta, opts))
        .collect();
    let mut theta = Array2::<f64>::zeros((p, p));
    let mut residuals = vec![0.0; p];
    for (j, row) in rows.into_iter().enumerate() {
        let (r, kkt) = row?;
        theta.row_mut(j).assign(&r);
        residuals[j] = kkt;
    }
    Ok(PrecisionEstimate {
        theta,
        feasibility_residuals: residuals,
        relaxation_rounds: vec![0; p],
        eta_used: vec![eta; p],
        mu_used: Vec::new(),
    })
}

/// Row `j` of the node-wise estimate and the KKT residual of its Lasso fit.
fn nodewise_row(
    g: ArrayView2<'_, f64>,
    j: usize,
    eta: f64,
    opts: &SolverOptions,
) -> Result<(Array1<f64>, f64)> {
    let p = g.nrows();
    let others: Vec<usize> = (0..p).filter(|&k| k != j).collect();
    let sub = g.select(Axis(0), &others).select(Axis(1), &others);
    let lin = g.column(j).select(Axis(0), &others);
    let fit = quadratic_cd(sub.view(), lin.view(), eta, opts);
    let gamma = fit.coefficients;
    let kkt = crate::solvers::quadratic_kkt_residual(sub.view(), lin.view(), gamma.view(), eta);
    let denom = g[[j, j]] - lin.dot(&gamma);
    if !(denom > NODEWISE_DENOMINATOR_FLOOR) {
        return Err(Error::PrecisionColumn {
            column: j,
            reason: format!("node-wise residual variance {denom:e} is not positive"),
        });
    }
    let diag = 1.0 / denom;
    let mut row = Array1::<f64>::zeros(p);
    row[j] = diag;
    for (pos, &k) in others.iter().enumerate() {
        row[k] = -diag * gamma[pos];
    }
    Ok((row, kkt))
}

/// Node-wise Lasso coefficients `gamma_j` recovered from a row of the
/// estimate (`-Theta_j,-j / Theta_jj`).
pub fn nodewise_coefficients(theta: ArrayView2<'_, f64>, j: usize) -> Array1<f64> {
    let d = theta[[j, j]];
    Array1::from_iter((0..theta.ncols()).filter(|&k| k != j).map(|k| -theta[[j, k]] / d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn weighted_design_at_zero_halves_rows() {
        let x = array![[1.0, -2.0], [0.5, 4.0]];
        let u = weighted_design(x.view(), array![0.0, 0.0].view());
        assert_eq!(u, &x * 0.5);
    }

    #[test]
    fn weighted_design_extreme_predictor() {
        let x = array![[50.0, 1.0]];
        let u = weighted_design(x.view(), array![1.0, 0.0].view());
        assert!(u.iter().all(|v| v.is_finite()));
        let expected = (-25f64).exp();
        assert!((u[[0, 1]] / expected - 1.0).abs() < 1e-9);
    }

    #[test]
    fn nodewise_orthogonal_columns() {
        // columns orthogonal, squared norms m and 4m
        let u = array![[1.0, 2.0], [1.0, -2.0], [-1.0, 2.0], [-1.0, -2.0]];
        let est = nodewise_precision(u.view(), 0.1, &SolverOptions::default()).unwrap();
        assert_eq!(est.theta[[0, 0]], 1.0);
        assert_eq!(est.theta[[1, 1]], 0.25);
        assert_eq!(est.theta[[0, 1]], 0.0);
        assert_eq!(est.theta[[1, 0]], 0.0);
    }

    #[test]
    fn nodewise_degenerate_column() {
        let u = array![[1.0, 0.0], [2.0, 0.0], [3.0, 0.0]];
        assert!(matches!(
            nodewise_precision(u.view(), 0.1, &SolverOptions::default()),
            Err(Error::PrecisionColumn { column: 1, .. })
        ));
    }

    #[test]
    fn clime_identity_geometry() {
        // each half has Gram exactly I
        let h = array![[1.0, 1.0], [1.0, -1.0]];
        let eta = 0.1;
        for solver in [LpSolver::default(), LpSolver::Admm(AdmmOptions::default())] {
            let cfg = ClimeConfig {
                eta,
                mu: 10.0,
                solver,
                max_relaxations: 0,
                screen: true,
            };
            let est = clime_pooled(h.view(), h.view(), &cfg).unwrap();
            for j in 0..2 {
                assert!((est.theta[[j, j]] - (1.0 - eta)).abs() < 1e-5);
                assert!(est.theta[[j, 1 - j]].abs() < 1e-5);
                let l1: f64 = est.theta.row(j).iter().map(|v| v.abs()).sum();
                assert!((l1 - (1.0 - eta)).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn feasibility_bound_single_row() {
        // X = [1, 1]: null space spanned by (1, -1), so the bound is 1/2
        let x = array![[1.0, 1.0]];
        let b = gram_feasibility_bound(x.view(), 0, &SimplexOptions::default()).unwrap();
        assert!((b - 0.5).abs() < 1e-12);
        let full = array![[1.0, 0.0], [0.0, 1.0]];
        assert_eq!(gram_feasibility_bound(full.view(), 1, &SimplexOptions::default()).unwrap(), 0.0);
    }

    #[test]
    fn relaxation_recorded() {
        // rank-one halves: eta = 0.1 is certifiably infeasible, 0.8 is not
        let h = array![[1.0, 1.0]];
        let cfg = ClimeConfig {
            eta: 0.1,
            mu: 100.0,
            solver: LpSolver::default(),
            max_relaxations: 5,
            screen: true,
        };
        let est = clime_pooled(h.view(), h.view(), &cfg).unwrap();
        assert_eq!(est.relaxation_rounds, vec![3, 3]);
        assert!((est.eta_used[0] - 0.8).abs() < 1e-12);
        let unscreened = clime_pooled(h.view(), h.view(), &ClimeConfig { screen: false, ..cfg.clone() }).unwrap();
        assert_eq!(unscreened.relaxation_rounds, est.relaxation_rounds);
        assert!((&unscreened.theta - &est.theta).iter().all(|v| v.abs() < 1e-12));
        let tight = ClimeConfig { max_relaxations: 1, ..cfg };
        assert!(matches!(
            clime_pooled(h.view(), h.view(), &tight),
            Err(Error::PrecisionColumn { .. })
        ));
    }

    #[test]
    fn clime_rejects_mismatched_halves() {
        let a = array![[1.0, 2.0]];
        let b = array![[1.0]];
        let cfg = ClimeConfig::from_rates(2, 2, 0.5, 2.0);
        assert!(matches!(clime_pooled(a.view(), b.view(), &cfg), Err(Error::Dimension(_))));
    }
}
