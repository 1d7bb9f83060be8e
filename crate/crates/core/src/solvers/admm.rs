use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use super::soft_threshold;
use crate::error::{Error, Result};
use crate::linalg::{ensure_finite_matrix, ensure_finite_vector, max_abs, spd_inverse};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmOptions {
    pub rho: f64,
    pub relaxation: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Residuals are evaluated every this many iterations.
    pub check_every: usize,
}

impl Default for AdmmOptions {
    fn default() -> Self {
        Self {
            rho: 1.0,
            relaxation: 1.5,
            tolerance: 1e-6,
            max_iterations: 10_000,
            check_every: 10,
        }
    }
}

/// A family of linear programs sharing one constraint matrix:
/// for every column `b_c` of `rhs`, minimize `||theta||_1` subject to
/// `|A theta - b_c| <= widths` row-wise.
#[derive(Debug, Clone)]
pub struct BoxLp<'a> {
    pub a: ArrayView2<'a, f64>,
    pub rhs: ArrayView2<'a, f64>,
    pub widths: ArrayView1<'a, f64>,
}

#[derive(Debug, Clone)]
pub struct BoxLpSolution {
    /// One solution per right-hand side, stored column-wise (`p x cols`).
    pub theta: Array2<f64>,
    pub iterations: Vec<usize>,
    pub converged: Vec<bool>,
    /// `max_i (|A theta - b|_i - width_i)_+` per column.
    pub violation: Vec<f64>,
}

struct Work {
    cols: Vec<usize>,
    rhs: Array2<f64>,
    theta: Array2<f64>,
    z: Array2<f64>,
    w: Array2<f64>,
    u: Array2<f64>,
    v: Array2<f64>,
}

impl Work {
    fn keep(&mut self, keep: &[usize]) {
        let pick = |m: &Array2<f64>| m.select(Axis(1), keep);
        self.cols = keep.iter().map(|&k| self.cols[k]).collect();
        self.rhs = pick(&self.rhs);
        self.theta = pick(&self.theta);
        self.z = pick(&self.z);
        self.w = pick(&self.w);
        self.u = pick(&self.u);
        self.v = pick(&self.v);
    }
}

/// Solves a [`BoxLp`] by over-relaxed ADMM on the splitting
/// `A theta - b = z` (box-constrained) and `theta = w` (l1 term).
///
/// All right-hand sides advance together so the linear algebra runs as
/// matrix-matrix products; a column leaves the working set once its
/// primal residual, dual residual and constraint violation are all below
/// `opts.tolerance`. The returned point is the sparse `w` iterate.
pub fn l1_box_admm(lp: &BoxLp<'_>, opts: &AdmmOptions) -> Result<BoxLpSolution> {
    let (k, p) = lp.a.dim();
    ensure_finite_matrix(lp.a, "constraint matrix")?;
    ensure_finite_vector(lp.widths, "constraint widths")?;
    if lp.rhs.nrows() != k || lp.widths.len() != k {
        return Err(Error::dim(format!(
            "constraint matrix has {k} rows, rhs has {}, widths has {}",
            lp.rhs.nrows(),
            lp.widths.len()
        )));
    }
    if lp.widths.iter().any(|w| *w < 0.0) {
        return Err(Error::input("constraint widths must be nonnegative"));
    }
    if !(opts.rho > 0.0 && opts.relaxation > 0.0 && opts.relaxation < 2.0) {
        return Err(Error::input("ADMM needs rho > 0 and relaxation in (0, 2)"));
    }
    if opts.max_iterations == 0 || opts.check_every == 0 {
        return Err(Error::input("ADMM iteration counts must be positive"));
    }
    let ncols = lp.rhs.ncols();

    let mut normal = lp.a.t().dot(&lp.a);
    for i in 0..p {
        normal[[i, i]] += 1.0;
    }
    let normal_inv = spd_inverse(normal.view())?;

    let mut theta_out = Array2::<f64>::zeros((p, ncols));
    let mut iterations = vec![opts.max_iterations; ncols];
    let mut converged = vec![false; ncols];
    let mut violation = vec![f64::INFINITY; ncols];

    let widths = lp.widths.to_owned();
    let clip = |x: f64, wdt: f64| x.clamp(-wdt, wdt);
    let alpha = opts.relaxation;
    let kappa = 1.0 / opts.rho;

    let mut work = Work {
        cols: (0..ncols).collect(),
        rhs: lp.rhs.to_owned(),
        theta: Array2::zeros((p, ncols)),
        z: Array2::zeros((k, ncols)),
        w: Array2::zeros((p, ncols)),
        u: Array2::zeros((k, ncols)),
        v: Array2::zeros((p, ncols)),
    };
    Zip::from(work.z.rows_mut())
        .and(work.rhs.rows())
        .and(&widths)
        .for_each(|mut z, b, &wd| {
            z.zip_mut_with(&b, |zi, &bi| *zi = clip(-bi, wd));
        });

    let mut iter = 0;
    while iter < opts.max_iterations && !work.cols.is_empty() {
        iter += 1;
        // theta = (A^T A + I)^-1 (A^T (z + b - u) + w - v)
        let target = &work.z + &work.rhs - &work.u;
        let mut q = lp.a.t().dot(&target);
        q += &work.w;
        q -= &work.v;
        work.theta = normal_inv.dot(&q);
        let a_theta = lp.a.dot(&work.theta);

        // relaxed images of the two constraint blocks
        let mut h_a = a_theta.clone();
        h_a *= alpha;
        h_a.scaled_add(1.0 - alpha, &(&work.z + &work.rhs));
        let mut h_i = work.theta.clone();
        h_i *= alpha;
        h_i.scaled_add(1.0 - alpha, &work.w);

        let z_old = std::mem::take(&mut work.z);
        let w_old = std::mem::take(&mut work.w);

        let mut z = &h_a - &work.rhs + &work.u;
        Zip::from(z.rows_mut()).and(&widths).for_each(|mut row, &wd| {
            row.mapv_inplace(|x| clip(x, wd));
        });
        let mut w = &h_i + &work.v;
        w.mapv_inplace(|x| soft_threshold(x, kappa));

        work.u += &(&h_a - &work.rhs - &z);
        work.v += &(&h_i - &w);
        work.z = z;
        work.w = w;

        if iter % opts.check_every != 0 && iter < opts.max_iterations {
            continue;
        }

        let r_a = &a_theta - &work.rhs - &work.z;
        let r_i = &work.theta - &work.w;
        let dz = &work.z - &z_old;
        let dw = &work.w - &w_old;
        let mut dual = lp.a.t().dot(&dz);
        dual += &dw;
        dual *= opts.rho;
        let aw = lp.a.dot(&work.w);

        let mut done = Vec::new();
        let mut keep = Vec::new();
        for c in 0..work.cols.len() {
            let primal = max_abs(r_a.column(c)).max(max_abs(r_i.column(c)));
            let dres = max_abs(dual.column(c));
            let viol = column_violation(aw.column(c), work.rhs.column(c), widths.view());
            let orig = work.cols[c];
            violation[orig] = viol;
            if primal <= opts.tolerance && dres <= opts.tolerance && viol <= opts.tolerance {
                converged[orig] = true;
                iterations[orig] = iter;
                done.push(c);
            } else {
                keep.push(c);
            }
        }
        for &c in &done {
            theta_out.column_mut(work.cols[c]).assign(&work.w.column(c));
        }
        if !done.is_empty() {
            work.keep(&keep);
        }
    }
    for (c, &orig) in work.cols.iter().enumerate() {
        theta_out.column_mut(orig).assign(&work.w.column(c));
        iterations[orig] = iter;
    }

    Ok(BoxLpSolution {
        theta: theta_out,
        iterations,
        converged,
        violation,
    })
}

fn column_violation(at: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>, widths: ArrayView1<'_, f64>) -> f64 {
    Zip::from(&at)
        .and(&b)
        .and(&widths)
        .fold(0.0_f64, |m, &x, &bi, &wd| m.max((x - bi).abs() - wd))
        .max(0.0)
}

/// Dantzig selector: minimize `||b||_1` subject to
/// `||X^T (y - X b) / n||_inf <= lambda`.
///
/// Returns an error when ADMM does not reach the feasibility tolerance.
pub fn dantzig_selector(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    lambda: f64,
    opts: &AdmmOptions,
) -> Result<Array1<f64>> {
    ensure_finite_matrix(x, "design")?;
    ensure_finite_vector(y, "response")?;
    if x.nrows() != y.len() {
        return Err(Error::dim(format!(
            "design has {} rows but response has length {}",
            x.nrows(),
            y.len()
        )));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::input(format!("lambda must be positive, got {lambda}")));
    }
    let n = x.nrows() as f64;
    let g = x.t().dot(&x) / n;
    let c = x.t().dot(&y) / n;
    if max_abs(c.view()) <= lambda {
        return Ok(Array1::zeros(x.ncols()));
    }
    let rhs = c.view().insert_axis(Axis(1));
    let widths = Array1::from_elem(x.ncols(), lambda);
    let sol = l1_box_admm(
        &BoxLp {
            a: g.view(),
            rhs,
            widths: widths.view(),
        },
        opts,
    )?;
    if !sol.converged[0] {
        return Err(Error::NonConvergence(format!(
            "dantzig selector ADMM stopped after {} iterations with violation {:e}",
            sol.iterations[0], sol.violation[0]
        )));
    }
    Ok(sol.theta.column(0).to_owned())
}
