//! Brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// `min ||b - v||_1` over `||b||_0 <= s0` by enumerating every support.
pub fn l0_bruteforce(v: ArrayView1<'_, f64>, s0: usize) -> f64 {
    let p = v.len();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << p) {
        if mask.count_ones() as usize > s0 {
            continue;
        }
        let d: f64 = (0..p).filter(|j| mask & (1 << j) == 0).map(|j| v[j].abs()).sum();
        best = best.min(d);
    }
    best
}

/// `min |b - a|` over `b in {0} U {|b| >= c}` on a grid that includes the
/// kinks of the piecewise-linear objective.
pub fn betamin_grid(a: f64, c: f64) -> (f64, f64) {
    let reach = a.abs() + c + 1.0;
    let mut cands = vec![0.0, c, -c, a];
    for k in 0..=2000 {
        let t = c + (reach - c) * k as f64 / 2000.0;
        cands.push(t);
        cands.push(-t);
    }
    cands
        .into_iter()
        .filter(|b| *b == 0.0 || b.abs() >= c)
        .map(|b| ((b - a).abs(), b))
        .fold((f64::INFINITY, 0.0), |m, x| if x.0 < m.0 { x } else { m })
}

/// Projected subgradient for `min ||b - v||_1` s.t. `||Q b||_2 <= c`, run in
/// `w = Q b` so the feasible set is a Euclidean ball. Returns the best
/// objective value seen.
pub fn quadratic_subgradient(v: ArrayView1<'_, f64>, q: ArrayView2<'_, f64>, c: f64, iters: usize) -> f64 {
    let q_inv = invert(q);
    let obj = |w: &Array1<f64>| (q_inv.dot(w) - v).iter().map(|x| x.abs()).sum::<f64>();
    let project_ball = |w: Array1<f64>| {
        let norm = w.dot(&w).sqrt();
        if norm > c {
            w * (c / norm)
        } else {
            w
        }
    };
    let mut w = project_ball(q.dot(&v));
    let mut best = obj(&w);
    let scale = c;
    for k in 0..iters {
        let r = q_inv.dot(&w) - v;
        let sign = r.mapv(|x| if x > 0.0 { 1.0 } else if x < 0.0 { -1.0 } else { 0.0 });
        let g = q_inv.t().dot(&sign);
        let gn = g.dot(&g).sqrt();
        if gn == 0.0 {
            break;
        }
        let step = scale / ((k + 1) as f64).sqrt();
        w = project_ball(&w - &(g * (step / gn)));
        best = best.min(obj(&w));
    }
    best
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn invert(m: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = m.nrows();
    let mut a = m.to_owned();
    let mut inv = Array2::<f64>::eye(n);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[[i, col]].abs().total_cmp(&a[[j, col]].abs())).unwrap();
        for k in 0..n {
            a.swap([col, k], [piv, k]);
            inv.swap([col, k], [piv, k]);
        }
        let d = a[[col, col]];
        for k in 0..n {
            a[[col, k]] /= d;
            inv[[col, k]] /= d;
        }
        for i in 0..n {
            if i != col {
                let f = a[[i, col]];
                if f != 0.0 {
                    for k in 0..n {
                        a[[i, k]] -= f * a[[col, k]];
                        inv[[i, k]] -= f * inv[[col, k]];
                    }
                }
            }
        }
    }
    inv
}

/// `min ||theta||_1` s.t. `lower <= A theta <= upper` by vertex enumeration:
/// within each orthant the optimum sits where `p` of the hyperplanes
/// `a_i theta = lower_i`, `a_i theta = upper_i`, `theta_j = 0` meet.
/// `None` if no vertex is feasible.
pub fn vertex_lp(a: ArrayView2<'_, f64>, lower: ArrayView1<'_, f64>, upper: ArrayView1<'_, f64>) -> Option<f64> {
    let (k, p) = a.dim();
    let mut planes: Vec<(Array1<f64>, f64)> = Vec::new();
    for i in 0..k {
        planes.push((a.row(i).to_owned(), lower[i]));
        if upper[i] != lower[i] {
            planes.push((a.row(i).to_owned(), upper[i]));
        }
    }
    for j in 0..p {
        let mut e = Array1::zeros(p);
        e[j] = 1.0;
        planes.push((e, 0.0));
    }
    let mut best: Option<f64> = None;
    let mut idx: Vec<usize> = (0..p).collect();
    let m = planes.len();
    loop {
        let mut sys = Array2::<f64>::zeros((p, p));
        let mut rhs = Array1::<f64>::zeros(p);
        for (r, &pi) in idx.iter().enumerate() {
            sys.row_mut(r).assign(&planes[pi].0);
            rhs[r] = planes[pi].1;
        }
        if let Some(theta) = solve(sys, rhs) {
            let at = a.dot(&theta);
            let scale = 1.0 + theta.iter().fold(0.0_f64, |s, x| s.max(x.abs()));
            let ok = (0..k).all(|i| at[i] >= lower[i] - 1e-9 * scale && at[i] <= upper[i] + 1e-9 * scale);
            if ok {
                let l1: f64 = theta.iter().map(|x| x.abs()).sum();
                best = Some(best.map_or(l1, |b: f64| b.min(l1)));
            }
        }
        // next combination
        let mut i = p;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < m - p + i {
                break;
            }
        }
        idx[i] += 1;
        for t in i + 1..p {
            idx[t] = idx[t - 1] + 1;
        }
    }
}

fn solve(mut a: Array2<f64>, mut b: Array1<f64>) -> Option<Array1<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[[i, col]].abs().total_cmp(&a[[j, col]].abs()))?;
        if a[[piv, col]].abs() < 1e-10 {
            return None;
        }
        for k in 0..n {
            a.swap([col, k], [piv, k]);
        }
        b.swap(col, piv);
        for i in col + 1..n {
            let f = a[[i, col]] / a[[col, col]];
            for k in col..n {
                a[[i, k]] -= f * a[[col, k]];
            }
            b[i] -= f * b[col];
        }
    }
    let mut x = Array1::zeros(n);
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[[i, k]] * x[k]).sum();
        x[i] = (b[i] - s) / a[[i, i]];
    }
    Some(x)
}

pub fn random_vector(rng: &mut ChaCha8Rng, p: usize, scale: f64) -> Array1<f64> {
    Array1::from_shape_fn(p, |_| rng.gen_range(-scale..scale))
}

/// `I + B B^T / p` with uniform `B`: well conditioned and positive definite.
pub fn random_pd(rng: &mut ChaCha8Rng, p: usize) -> Array2<f64> {
    let b = Array2::from_shape_fn((p, p), |_| rng.gen_range(-1.0..1.0));
    Array2::<f64>::eye(p) + b.dot(&b.t()) / p as f64
}

/// Design with `X^T X / n = I` (scaled orthonormal columns via Gram-Schmidt).
pub fn orthonormal_design(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Array2<f64> {
    let mut x: Array2<f64> = Array2::from_shape_fn((n, p), |_| rng.gen_range(-1.0..1.0));
    for j in 0..p {
        for k in 0..j {
            let proj = x.column(j).dot(&x.column(k));
            let ck = x.column(k).to_owned();
            x.column_mut(j).scaled_add(-proj, &ck);
        }
        let norm = x.column(j).dot(&x.column(j)).sqrt();
        x.column_mut(j).mapv_inplace(|v| v / norm);
    }
    x * (n as f64).sqrt()
}
