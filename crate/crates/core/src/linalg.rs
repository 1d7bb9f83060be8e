//! Small dense linear-algebra helpers on top of `ndarray`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

pub fn ensure_finite_matrix(m: ArrayView2<'_, f64>, what: &str) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::input(format!("{what} must be non-empty")));
    }
    if let Some(((i, j), v)) = m.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::input(format!("{what}[{i},{j}] is not finite ({v})")));
    }
    Ok(())
}

pub fn ensure_finite_vector(v: ArrayView1<'_, f64>, what: &str) -> Result<()> {
    if let Some((i, x)) = v.indexed_iter().find(|(_, x)| !x.is_finite()) {
        return Err(Error::input(format!("{what}[{i}] is not finite ({x})")));
    }
    Ok(())
}

pub fn max_abs(v: ArrayView1<'_, f64>) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub fn l1_norm(v: ArrayView1<'_, f64>) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// `X^T X / rows(X)`.
pub fn gram(x: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = x.nrows() as f64;
    let mut g = x.t().dot(&x);
    g /= n;
    g
}

/// Lower-triangular `L` with `L L^T = sigma`.
pub fn cholesky(sigma: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let p = sigma.nrows();
    if sigma.ncols() != p {
        return Err(Error::dim(format!(
            "cholesky needs a square matrix, got {}x{}",
            p,
            sigma.ncols()
        )));
    }
    let scale = sigma.diag().iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let floor = scale * 1e-13;
    let mut l = Array2::<f64>::zeros((p, p));
    for j in 0..p {
        let mut d = sigma[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d > floor) {
            return Err(Error::NotPositiveDefinite { pivot: j, value: d });
        }
        let d = d.sqrt();
        l[[j, j]] = d;
        for i in (j + 1)..p {
            let mut s = sigma[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / d;
        }
    }
    Ok(l)
}

/// Solves `L L^T x = b` given the lower Cholesky factor.
pub fn cholesky_solve(l: ArrayView2<'_, f64>, b: ArrayView1<'_, f64>) -> Array1<f64> {
    let p = l.nrows();
    let mut y = b.to_owned();
    for i in 0..p {
        let mut s = y[i];
        for k in 0..i {
            s -= l[[i, k]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    for i in (0..p).rev() {
        let mut s = y[i];
        for k in (i + 1)..p {
            s -= l[[k, i]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    y
}

/// Inverse of a symmetric positive definite matrix.
pub fn spd_inverse(a: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let l = cholesky(a)?;
    let p = a.nrows();
    let mut inv = Array2::<f64>::zeros((p, p));
    let mut e = Array1::<f64>::zeros(p);
    for j in 0..p {
        e.fill(0.0);
        e[j] = 1.0;
        let col = cholesky_solve(l.view(), e.view());
        inv.column_mut(j).assign(&col);
    }
    // symmetrize away round-off
    let t = inv.t().to_owned();
    inv += &t;
    inv *= 0.5;
    Ok(inv)
}

/// Row-wise mean of a matrix (mean over rows, one entry per column).
pub fn column_means(m: ArrayView2<'_, f64>) -> Array1<f64> {
    m.mean_axis(Axis(0)).expect("non-empty matrix")
}
