//! The projection pursuit test.
//!
//! Given data, a model and a null set `B0`:
//!
//! 1. fit a sparse initial estimate `beta_u`;
//! 2. project it onto `B0` in l1 distance to get `beta_d`;
//! 3. estimate inverse Hessians on the two half samples;
//! 4. form the bias correction
//!    `delta_sp = Theta_A mean_A s(z, beta_u) - Theta_B mean_B s(z, beta_d)`
//!    and keep it only when `||delta_sp||_inf <= n^(-1/4)`;
//! 5. `T_n = sqrt(n) ||beta_u - beta_d - delta||_inf`;
//! 6. calibrate with a Gaussian multiplier bootstrap of the influence
//!    vectors `R_i = +-2 Theta s(z_i, beta_u)` and reject when `T_n`
//!    exceeds the bootstrap `(1 - alpha)` quantile.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite_matrix, ensure_finite_vector, max_abs};
use crate::models::Model;
use crate::precision::{
    clime_pooled, nodewise_precision, weighted_design, ClimeConfig, LpSolver, PrecisionEstimate,
};
use crate::projection::{project, NullSet, ProjectionDiagnostics};
use crate::seeds;
use crate::solvers::{
    cross_validate_logistic, dantzig_selector, lasso_coordinate_descent, logistic_lambda_grid,
    logistic_lasso, scaled_lasso, universal_lambda, AdmmOptions, SolverOptions,
};

/// Response vector and design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Array1<f64>) -> Result<Self> {
        ensure_finite_matrix(x.view(), "design")?;
        ensure_finite_vector(y.view(), "response")?;
        if x.nrows() != y.len() {
            return Err(Error::dim(format!(
                "design has {} rows but response has length {}",
                x.nrows(),
                y.len()
            )));
        }
        Ok(Self { x, y })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitData {
    pub half_a: Dataset,
    pub half_b: Dataset,
    pub m_a: usize,
    pub m_b: usize,
}

/// First `floor(n/2)` observations form half A, the rest half B. No shuffling.
pub fn split_sample(data: &Dataset) -> Result<SplitData> {
    let n = data.n();
    if n < 4 {
        return Err(Error::input(format!("need at least 4 observations to split, got {n}")));
    }
    let m_a = n / 2;
    let half = |r: std::ops::Range<usize>| Dataset {
        x: data.x.slice(s![r.clone(), ..]).to_owned(),
        y: data.y.slice(s![r]).to_owned(),
    };
    Ok(SplitData {
        half_a: half(0..m_a),
        half_b: half(m_a..n),
        m_a,
        m_b: n - m_a,
    })
}

/// `Theta_A mean(scores_a) - Theta_B mean(scores_b)`; score matrices hold
/// one observation per row.
pub fn delta_sp(
    theta_a: ArrayView2<'_, f64>,
    theta_b: ArrayView2<'_, f64>,
    scores_a: ArrayView2<'_, f64>,
    scores_b: ArrayView2<'_, f64>,
) -> Array1<f64> {
    let mean_a = scores_a.mean_axis(Axis(0)).expect("non-empty half");
    let mean_b = scores_b.mean_axis(Axis(0)).expect("non-empty half");
    theta_a.dot(&mean_a) - theta_b.dot(&mean_b)
}

/// `n^(-1/4)`.
pub fn delta_threshold(n: usize) -> f64 {
    (n as f64).powf(-0.25)
}

/// Keeps `delta` when `||delta||_inf <= n^(-1/4)`, otherwise returns zeros.
pub fn threshold_delta(delta: ArrayView1<'_, f64>, n: usize) -> Array1<f64> {
    if max_abs(delta) <= delta_threshold(n) {
        delta.to_owned()
    } else {
        Array1::zeros(delta.len())
    }
}

/// `sqrt(n) max_j |beta_u_j - beta_d_j - delta_j|`.
pub fn test_statistic(
    beta_u: ArrayView1<'_, f64>,
    beta_d: ArrayView1<'_, f64>,
    delta: ArrayView1<'_, f64>,
    n: usize,
) -> f64 {
    let m = beta_u
        .iter()
        .zip(beta_d.iter())
        .zip(delta.iter())
        .map(|((u, d), e)| (u - d - e).abs())
        .fold(0.0_f64, f64::max);
    (n as f64).sqrt() * m
}

/// Influence vectors: `2 Theta_A s(z_i, beta_u)` on half A and
/// `-2 Theta_B s(z_i, beta_u)` on half B (rows), with their mean.
pub fn compute_r_hat(
    theta_a: ArrayView2<'_, f64>,
    theta_b: ArrayView2<'_, f64>,
    model: Model,
    split: &SplitData,
    beta_u: ArrayView1<'_, f64>,
) -> (Array2<f64>, Array1<f64>) {
    let sa = model.scores(split.half_a.x.view(), split.half_a.y.view(), beta_u);
    let sb = model.scores(split.half_b.x.view(), split.half_b.y.view(), beta_u);
    let ra = sa.dot(&theta_a.t()) * 2.0;
    let rb = sb.dot(&theta_b.t()) * -2.0;
    let r = ndarray::concatenate(Axis(0), &[ra.view(), rb.view()]).expect("equal widths");
    let r_star = r.mean_axis(Axis(0)).expect("non-empty");
    (r, r_star)
}

const DRAW_CHUNK: usize = 64;

/// Gaussian multiplier bootstrap of `n^(-1/2) max_j |sum_i (R_ij - R*_j) xi_i|`.
///
/// Draw `b` uses its own ChaCha stream (`seed`, stream `b`), and draws are
/// evaluated in fixed-size blocks, so the output does not depend on the
/// number of worker threads.
pub fn bootstrap_statistics(
    r_hat: ArrayView2<'_, f64>,
    r_star: ArrayView1<'_, f64>,
    draws: usize,
    seed: u64,
) -> Vec<f64> {
    let n = r_hat.nrows();
    // shift by the first row before centering; identical rows then cancel exactly
    let first = r_hat.row(0).to_owned();
    let shifted = &r_hat - &first;
    let shift_mean = shifted.mean_axis(Axis(0)).expect("non-empty");
    let centered = &shifted - &shift_mean;
    // r_star only fixes the centering point; the shift above is algebraically identical
    debug_assert_eq!(r_star.len(), r_hat.ncols());
    let scale = 1.0 / (n as f64).sqrt();

    let chunks: Vec<usize> = (0..draws.div_ceil(DRAW_CHUNK)).collect();
    let per_chunk: Vec<Vec<f64>> = chunks
        .par_iter()
        .map(|&c| {
            let start = c * DRAW_CHUNK;
            let stop = (start + DRAW_CHUNK).min(draws);
            let mut xi = Array2::<f64>::zeros((stop - start, n));
            for (row, b) in (start..stop).enumerate() {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(b as u64);
                for i in 0..n {
                    xi[[row, i]] = StandardNormal.sample(&mut rng);
                }
            }
            let sums = xi.dot(&centered);
            sums.rows()
                .into_iter()
                .map(|r| scale * max_abs(r))
                .collect()
        })
        .collect();
    per_chunk.into_iter().flatten().collect()
}

/// The `ceil((1 - alpha) B)`-th smallest draw, index clamped to `[1, B]`.
pub fn bootstrap_quantile(draws: &[f64], alpha: f64) -> f64 {
    assert!(!draws.is_empty(), "no bootstrap draws");
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let b = sorted.len();
    let rank = ((1.0 - alpha) * b as f64 - 1e-9).ceil().clamp(1.0, b as f64) as usize;
    sorted[rank - 1]
}

/// `(1 + #{b : T_b >= t_n}) / (B + 1)`.
pub fn p_value(draws: &[f64], t_n: f64) -> f64 {
    assert!(!draws.is_empty(), "no bootstrap draws");
    let exceed = draws.iter().filter(|&&t| t >= t_n).count();
    (1 + exceed) as f64 / (draws.len() + 1) as f64
}

/// How the initial estimate `beta_u` is computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum InitialEstimator {
    /// Scaled Lasso for the linear model, cross-validated l1 logistic
    /// regression for the logistic model.
    Auto,
    /// `lambda0 = None` means `sqrt(2 log p / n)`.
    ScaledLasso { lambda0: Option<f64> },
    Lasso { lambda: f64 },
    /// `lambda = None` means `sqrt(log p / n)`.
    Dantzig { lambda: Option<f64> },
    LogisticLasso { lambda: f64 },
    LogisticCv { folds: usize, grid_len: usize, min_ratio: f64 },
}

impl Default for InitialEstimator {
    fn default() -> Self {
        InitialEstimator::Auto
    }
}

pub const DEFAULT_CV: InitialEstimator = InitialEstimator::LogisticCv {
    folds: 10,
    grid_len: 20,
    min_ratio: 0.05,
};

/// Rate constants for the inverse-Hessian estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionConfig {
    /// CLIME: `eta = clime_eta_const * sqrt(log p / n)`.
    pub clime_eta_const: f64,
    /// CLIME: `mu = clime_mu_const * sqrt(log(max(p, n)))`.
    pub clime_mu_const: f64,
    /// Node-wise: `eta = nodewise_eta_const * (log p)^nodewise_log_exponent / sqrt(n)`.
    pub nodewise_eta_const: f64,
    pub nodewise_log_exponent: f64,
    pub max_relaxations: usize,
    pub clime_solver: LpSolver,
    /// Skip CLIME relaxation rounds that are provably infeasible.
    pub clime_screen: bool,
}

impl Default for PrecisionConfig {
    fn default() -> Self {
        Self {
            clime_eta_const: 0.5,
            clime_mu_const: 2.0,
            nodewise_eta_const: 0.5,
            nodewise_log_exponent: 0.5,
            max_relaxations: 5,
            clime_solver: LpSolver::default(),
            clime_screen: true,
        }
    }
}

impl PrecisionConfig {
    pub fn clime(&self, n: usize, p: usize) -> ClimeConfig {
        let mut cfg = ClimeConfig::from_rates(n, p, self.clime_eta_const, self.clime_mu_const);
        cfg.solver = self.clime_solver.clone();
        cfg.screen = self.clime_screen;
        cfg.max_relaxations = self.max_relaxations;
        cfg
    }

    pub fn nodewise_eta(&self, n: usize, p: usize) -> f64 {
        self.nodewise_eta_const * (p.max(2) as f64).ln().powf(self.nodewise_log_exponent) / (n as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub alpha: f64,
    pub bootstrap_draws: usize,
    pub seed: u64,
    pub initial: InitialEstimator,
    pub precision: PrecisionConfig,
    pub solver: SolverOptions,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            bootstrap_draws: 1000,
            seed: 0,
            initial: InitialEstimator::Auto,
            precision: PrecisionConfig::default(),
            solver: SolverOptions::default(),
        }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::input(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.bootstrap_draws < 100 {
            return Err(Error::input(format!(
                "at least 100 bootstrap draws are required, got {}",
                self.bootstrap_draws
            )));
        }
        self.solver.validate(0).or_else(|e| match e {
            Error::Dimension(_) => Ok(()),
            other => Err(other),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialDiagnostics {
    pub method: String,
    pub lambda: f64,
    pub sigma: Option<f64>,
    pub converged: bool,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionDiagnostics {
    pub method: String,
    pub eta: f64,
    pub mu: Option<f64>,
    /// Largest number of doublings applied to any row (CLIME).
    pub max_relaxation_rounds: usize,
    pub relaxed_rows: usize,
    pub max_eta_used: f64,
    pub max_mu_used: Option<f64>,
    pub max_feasibility_residual: f64,
}

impl PrecisionDiagnostics {
    fn from_estimate(method: &str, eta: f64, mu: Option<f64>, est: &PrecisionEstimate) -> Self {
        let fold = |v: &[f64]| v.iter().copied().fold(0.0_f64, f64::max);
        Self {
            method: method.to_owned(),
            eta,
            mu,
            max_relaxation_rounds: est.max_relaxation(),
            relaxed_rows: est.relaxation_rounds.iter().filter(|&&r| r > 0).count(),
            max_eta_used: fold(&est.eta_used),
            max_mu_used: mu.map(|_| fold(&est.mu_used)),
            max_feasibility_residual: fold(&est.feasibility_residuals),
        }
    }

    fn merge(self, other: Self) -> Self {
        Self {
            method: self.method,
            eta: self.eta,
            mu: self.mu,
            max_relaxation_rounds: self.max_relaxation_rounds.max(other.max_relaxation_rounds),
            relaxed_rows: self.relaxed_rows + other.relaxed_rows,
            max_eta_used: self.max_eta_used.max(other.max_eta_used),
            max_mu_used: self.max_mu_used,
            max_feasibility_residual: self.max_feasibility_residual.max(other.max_feasibility_residual),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub n: usize,
    pub p: usize,
    pub m_a: usize,
    pub m_b: usize,
    pub initial: InitialDiagnostics,
    pub projection: ProjectionDiagnostics,
    pub projection_distance: f64,
    pub precision: PrecisionDiagnostics,
    pub delta_sp_sup_norm: f64,
    pub delta_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub t_n: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
    /// Number of bootstrap draws.
    pub b: usize,
    pub seed: u64,
    /// True when the bias correction was discarded because
    /// `||delta_sp||_inf > n^(-1/4)`.
    pub delta_thresholded: bool,
    pub null_set: String,
    pub model: Model,
    pub delta_sp: Vec<f64>,
    pub beta_u: Vec<f64>,
    pub beta_d: Vec<f64>,
    pub diagnostics: Diagnostics,
    pub config: TestConfig,
}

fn fit_initial(
    data: &Dataset,
    model: Model,
    cfg: &TestConfig,
) -> Result<(Array1<f64>, InitialDiagnostics)> {
    let (n, p) = (data.n(), data.p());
    let x = data.x.view();
    let y = data.y.view();
    let method = match (&cfg.initial, model) {
        (InitialEstimator::Auto, Model::Linear) => InitialEstimator::ScaledLasso { lambda0: None },
        (InitialEstimator::Auto, Model::Logistic) => DEFAULT_CV,
        (m, _) => m.clone(),
    };
    let linear_only = |name: &str| {
        if model != Model::Linear {
            Err(Error::input(format!("{name} is only available for the linear model")))
        } else {
            Ok(())
        }
    };
    let logistic_only = |name: &str| {
        if model != Model::Logistic {
            Err(Error::input(format!("{name} is only available for the logistic model")))
        } else {
            Ok(())
        }
    };
    match method {
        InitialEstimator::Auto => unreachable!("resolved above"),
        InitialEstimator::ScaledLasso { lambda0 } => {
            linear_only("scaled lasso")?;
            let lambda0 = lambda0.unwrap_or_else(|| universal_lambda(n, p));
            let fit = scaled_lasso(x, y, lambda0, &cfg.solver)?;
            Ok((
                fit.coefficients,
                InitialDiagnostics {
                    method: "scaled_lasso".into(),
                    lambda: lambda0,
                    sigma: Some(fit.sigma),
                    converged: fit.converged,
                    degenerate: fit.degenerate,
                },
            ))
        }
        InitialEstimator::Lasso { lambda } => {
            linear_only("lasso")?;
            let fit = lasso_coordinate_descent(x, y, lambda, &cfg.solver)?;
            Ok((
                fit.coefficients,
                InitialDiagnostics {
                    method: "lasso".into(),
                    lambda,
                    sigma: None,
                    converged: fit.converged,
                    degenerate: false,
                },
            ))
        }
        InitialEstimator::Dantzig { lambda } => {
            linear_only("dantzig selector")?;
            let lambda = lambda.unwrap_or_else(|| ((p.max(2) as f64).ln() / n as f64).sqrt());
            let beta = dantzig_selector(x, y, lambda, &AdmmOptions::default())?;
            Ok((
                beta,
                InitialDiagnostics {
                    method: "dantzig".into(),
                    lambda,
                    sigma: None,
                    converged: true,
                    degenerate: false,
                },
            ))
        }
        InitialEstimator::LogisticLasso { lambda } => {
            logistic_only("logistic lasso")?;
            let fit = logistic_lasso(x, y, lambda, &cfg.solver)?;
            Ok((
                fit.coefficients,
                InitialDiagnostics {
                    method: "logistic_lasso".into(),
                    lambda,
                    sigma: None,
                    converged: fit.converged,
                    degenerate: false,
                },
            ))
        }
        InitialEstimator::LogisticCv {
            folds,
            grid_len,
            min_ratio,
        } => {
            logistic_only("cross-validated logistic lasso")?;
            let grid = logistic_lambda_grid(x, y, grid_len, min_ratio);
            let cv = cross_validate_logistic(x, y, &grid, folds, seeds::derive(cfg.seed, 1), &cfg.solver)?;
            let fit = logistic_lasso(x, y, cv.lambda, &cfg.solver)?;
            Ok((
                fit.coefficients,
                InitialDiagnostics {
                    method: format!("logistic_lasso_cv{folds}"),
                    lambda: cv.lambda,
                    sigma: None,
                    converged: fit.converged,
                    degenerate: false,
                },
            ))
        }
    }
}

/// Everything in the test that does not depend on the null set: the
/// initial estimate, the inverse-Hessian estimates and the bootstrap
/// distribution. [`PreparedTest::test`] then evaluates any number of null
/// sets on the same data.
#[derive(Debug, Clone)]
pub struct PreparedTest {
    pub model: Model,
    pub config: TestConfig,
    pub split: SplitData,
    pub beta_u: Array1<f64>,
    pub theta_a: Array2<f64>,
    pub theta_b: Array2<f64>,
    pub initial: InitialDiagnostics,
    pub precision: PrecisionDiagnostics,
    /// Bootstrap statistics in draw order.
    pub draws: Vec<f64>,
    pub critical_value: f64,
}

impl PreparedTest {
    pub fn new(data: &Dataset, model: Model, cfg: &TestConfig) -> Result<Self> {
        cfg.validate()?;
        let (n, p) = (data.n(), data.p());
        ensure_finite_matrix(data.x.view(), "design")?;
        ensure_finite_vector(data.y.view(), "response")?;
        if data.x.nrows() != n {
            return Err(Error::dim("design and response lengths differ"));
        }
        if model == Model::Logistic {
            if let Some(bad) = data.y.iter().find(|v| **v != 0.0 && **v != 1.0) {
                return Err(Error::input(format!("logistic response must be 0/1, found {bad}")));
            }
        }
        let split = split_sample(data)?;
        let (beta_u, initial) = fit_initial(data, model, cfg).map_err(|e| e.at("initial estimator"))?;

        let (theta_a, theta_b, precision) = match model {
            Model::Linear => {
                let clime = cfg.precision.clime(n, p);
                let est = clime_pooled(split.half_a.x.view(), split.half_b.x.view(), &clime)
                    .map_err(|e| e.at("precision"))?;
                let diag = PrecisionDiagnostics::from_estimate("clime_pooled", clime.eta, Some(clime.mu), &est);
                (est.theta.clone(), est.theta, diag)
            }
            Model::Logistic => {
                let eta = cfg.precision.nodewise_eta(n, p);
                let ua = weighted_design(split.half_a.x.view(), beta_u.view());
                let ub = weighted_design(split.half_b.x.view(), beta_u.view());
                let ea = nodewise_precision(ua.view(), eta, &cfg.solver).map_err(|e| e.at("precision (half A)"))?;
                let eb = nodewise_precision(ub.view(), eta, &cfg.solver).map_err(|e| e.at("precision (half B)"))?;
                let diag = PrecisionDiagnostics::from_estimate("nodewise_lasso", eta, None, &ea)
                    .merge(PrecisionDiagnostics::from_estimate("nodewise_lasso", eta, None, &eb));
                (ea.theta, eb.theta, diag)
            }
        };

        let (r_hat, r_star) = compute_r_hat(theta_a.view(), theta_b.view(), model, &split, beta_u.view());
        let draws = bootstrap_statistics(r_hat.view(), r_star.view(), cfg.bootstrap_draws, cfg.seed);
        let critical_value = bootstrap_quantile(&draws, cfg.alpha);
        Ok(Self {
            model,
            config: cfg.clone(),
            split,
            beta_u,
            theta_a,
            theta_b,
            initial,
            precision,
            draws,
            critical_value,
        })
    }

    pub fn n(&self) -> usize {
        self.split.m_a + self.split.m_b
    }

    /// Tests `beta* in set`.
    pub fn test(&self, set: &NullSet) -> Result<TestResult> {
        let (n, p) = (self.n(), self.beta_u.len());
        set.validate(p)?;
        let proj = project(self.beta_u.view(), set).map_err(|e| e.at("projection"))?;
        let beta_d = proj.point;
        let sp = &self.split;
        let scores_a = self.model.scores(sp.half_a.x.view(), sp.half_a.y.view(), self.beta_u.view());
        let scores_b = self.model.scores(sp.half_b.x.view(), sp.half_b.y.view(), beta_d.view());
        let dsp = delta_sp(self.theta_a.view(), self.theta_b.view(), scores_a.view(), scores_b.view());
        let delta = threshold_delta(dsp.view(), n);
        let dsp_norm = max_abs(dsp.view());
        let threshold = delta_threshold(n);
        let t_n = test_statistic(self.beta_u.view(), beta_d.view(), delta.view(), n);
        let cfg = &self.config;
        Ok(TestResult {
            t_n,
            critical_value: self.critical_value,
            p_value: p_value(&self.draws, t_n),
            alpha: cfg.alpha,
            reject: t_n > self.critical_value,
            b: cfg.bootstrap_draws,
            seed: cfg.seed,
            delta_thresholded: dsp_norm > threshold,
            null_set: set.to_string(),
            model: self.model,
            delta_sp: dsp.to_vec(),
            beta_u: self.beta_u.to_vec(),
            beta_d: beta_d.to_vec(),
            diagnostics: Diagnostics {
                n,
                p,
                m_a: sp.m_a,
                m_b: sp.m_b,
                initial: self.initial.clone(),
                projection: proj.diagnostics,
                projection_distance: proj.distance,
                precision: self.precision.clone(),
                delta_sp_sup_norm: dsp_norm,
                delta_threshold: threshold,
            },
            config: cfg.clone(),
        })
    }
}

/// Runs the full projection pursuit test.
pub fn run_pptest(data: &Dataset, model: Model, set: &NullSet, cfg: &TestConfig) -> Result<TestResult> {
    set.validate(data.p())?;
    PreparedTest::new(data, model, cfg)?.test(set)
}
