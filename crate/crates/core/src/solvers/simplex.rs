//! Bounded dual simplex for `min ||theta||_1` subject to row boxes
//! `lower_i <= a_i^T theta <= upper_i`.
//!
//! Every row gets a boxed slack `r_i = a_i^T theta`. With `theta = 0` and all
//! slacks basic the basis is dual feasible (each `|theta_j|` has slope one in
//! both directions), so only primal infeasibilities have to be repaired.
//! Coefficients are kept in one tableau column each, oriented by the sign in
//! which they last entered the basis; a basic coefficient that changes sign
//! leaves at zero or flips orientation.
//!
//! Rows flagged as lazy stay out of the tableau until the current optimum
//! violates them. With sparse solutions most rows never enter.

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite_matrix, ensure_finite_vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexOptions {
    /// `None` means `20 (rows + columns)`.
    pub max_pivots: Option<usize>,
    pub feasibility_tolerance: f64,
    pub pivot_tolerance: f64,
    /// Basic values are recomputed from the tableau this often.
    pub refresh_every: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_pivots: None,
            feasibility_tolerance: 1e-10,
            pivot_tolerance: 1e-9,
            refresh_every: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    PivotLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexSolution {
    pub theta: Array1<f64>,
    pub status: LpStatus,
    pub pivots: usize,
    /// `max_i (lower_i - a_i^T theta, a_i^T theta - upper_i, 0)` over all rows.
    pub violation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Var {
    /// coefficient `j`; the tracked quantity is `sign * theta_j`
    Coef(usize),
    /// slack of constraint row `i`
    Slack(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Pos {
    Basic(usize),
    /// coefficient at zero, or slack at one of its bounds
    Column(usize),
    /// lazy row not yet in the tableau
    Absent,
}

struct Dual<'a> {
    a: ArrayView2<'a, f64>,
    lower: ArrayView1<'a, f64>,
    upper: ArrayView1<'a, f64>,
    p: usize,
    /// orientation of each coefficient
    sign: Vec<f64>,
    coef_value: Vec<f64>,
    coef_pos: Vec<Pos>,
    slack_value: Vec<f64>,
    slack_pos: Vec<Pos>,
    /// nonbasic slack sits at its upper bound
    at_upper: Vec<bool>,
    /// row-major tableau, `p` columns: `x_B = -T x_N`
    t: Vec<f64>,
    norms: Vec<f64>,
    basic: Vec<Var>,
    column: Vec<Var>,
    /// reduced cost of the column variable moving in its admissible direction
    d: Vec<f64>,
}

impl<'a> Dual<'a> {
    fn value(&self, v: Var) -> f64 {
        match v {
            Var::Coef(j) => self.sign[j] * self.coef_value[j],
            Var::Slack(i) => self.slack_value[i],
        }
    }

    fn set_value(&mut self, v: Var, x: f64) {
        match v {
            Var::Coef(j) => self.coef_value[j] = self.sign[j] * x,
            Var::Slack(i) => self.slack_value[i] = x,
        }
    }

    fn set_pos(&mut self, v: Var, pos: Pos) {
        match v {
            Var::Coef(j) => self.coef_pos[j] = pos,
            Var::Slack(i) => self.slack_pos[i] = pos,
        }
    }

    fn bounds(&self, v: Var) -> (f64, f64) {
        match v {
            Var::Coef(_) => (0.0, f64::INFINITY),
            Var::Slack(i) => (self.lower[i], self.upper[i]),
        }
    }

    fn infeasibility(&self, v: Var) -> f64 {
        let x = self.value(v);
        let (lo, up) = self.bounds(v);
        (lo - x).max(x - up).max(0.0)
    }

    fn add_row(&mut self, i: usize) {
        let p = self.p;
        let mut row = vec![0.0; p];
        let mut value = 0.0;
        for j in 0..p {
            let aij = self.a[[i, j]];
            if aij == 0.0 {
                continue;
            }
            value += aij * self.coef_value[j];
            // theta_j = sign_j * (tracked variable)
            let s = self.sign[j] * aij;
            match self.coef_pos[j] {
                Pos::Basic(r) => {
                    for (dst, src) in row.iter_mut().zip(&self.t[r * p..(r + 1) * p]) {
                        *dst += s * src;
                    }
                }
                Pos::Column(c) => row[c] -= s,
                Pos::Absent => unreachable!("coefficients are always present"),
            }
        }
        self.slack_value[i] = value;
        self.slack_pos[i] = Pos::Basic(self.basic.len());
        self.norms.push(1.0 + row.iter().map(|v| v * v).sum::<f64>());
        self.basic.push(Var::Slack(i));
        self.t.extend_from_slice(&row);
    }

    fn refresh(&mut self) {
        let p = self.p;
        let xs: Vec<f64> = self.column.iter().map(|&v| self.value(v)).collect();
        for r in 0..self.basic.len() {
            let row = &self.t[r * p..(r + 1) * p];
            let v: f64 = row.iter().zip(&xs).map(|(a, b)| a * b).sum();
            self.set_value(self.basic[r], -v);
        }
    }

    /// Pivots column `q` into row `r`; the leaving variable is set to
    /// `target`, its lower bound when `to_lower`.
    fn pivot(&mut self, r: usize, q: usize, target: f64, to_lower: bool) {
        let p = self.p;
        let alpha = self.t[r * p + q];
        let leaving = self.basic[r];
        let entering = self.column[q];

        let dx = -(target - self.value(leaving)) / alpha;
        for i in 0..self.basic.len() {
            if i != r {
                let v = self.basic[i];
                let x = self.value(v) - self.t[i * p + q] * dx;
                self.set_value(v, x);
            }
        }
        let xe = self.value(entering) + dx;
        self.set_value(entering, xe);
        self.set_value(leaving, target);

        let td = self.d[q] / alpha;
        let mut scaled: Vec<f64> = self.t[r * p..(r + 1) * p].to_vec();
        for (dj, &tr) in self.d.iter_mut().zip(&scaled) {
            *dj -= td * tr;
        }
        self.d[q] = -td;

        for v in scaled.iter_mut() {
            *v /= alpha;
        }
        scaled[q] = 1.0 / alpha;
        for i in 0..self.basic.len() {
            if i == r {
                continue;
            }
            let row = &mut self.t[i * p..(i + 1) * p];
            let f = row[q];
            if f == 0.0 {
                continue;
            }
            row[q] = 0.0;
            let mut norm = 1.0;
            for (dst, s) in row.iter_mut().zip(&scaled) {
                *dst -= f * s;
                norm += *dst * *dst;
            }
            self.norms[i] = norm;
        }
        self.norms[r] = 1.0 + scaled.iter().map(|v| v * v).sum::<f64>();
        self.t[r * p..(r + 1) * p].copy_from_slice(&scaled);

        self.basic[r] = entering;
        self.set_pos(entering, Pos::Basic(r));
        self.column[q] = leaving;
        self.set_pos(leaving, Pos::Column(q));
        if let Var::Slack(i) = leaving {
            self.at_upper[i] = !to_lower;
        }
    }

    /// Switches the orientation of the coefficient held by column `q`.
    fn reverse_column(&mut self, q: usize) {
        let p = self.p;
        let Var::Coef(j) = self.column[q] else {
            unreachable!("only coefficient columns reverse")
        };
        for r in 0..self.basic.len() {
            self.t[r * p + q] = -self.t[r * p + q];
        }
        self.d[q] = 2.0 - self.d[q];
        self.sign[j] = -self.sign[j];
    }

    /// Clamps reduced costs left slightly infeasible by Harris steps.
    fn clean_reduced_costs(&mut self) {
        for (q, v) in self.column.iter().enumerate() {
            let d = &mut self.d[q];
            match *v {
                Var::Coef(_) => *d = d.clamp(0.0, 2.0),
                Var::Slack(i) if self.lower[i] == self.upper[i] => {}
                Var::Slack(i) if self.at_upper[i] => *d = d.min(0.0),
                Var::Slack(_) => *d = d.max(0.0),
            }
        }
    }

    /// Basic coefficient in row `r` passes through zero: its orientation
    /// flips and the row changes sign.
    fn flip(&mut self, r: usize) {
        let p = self.p;
        let Var::Coef(j) = self.basic[r] else {
            unreachable!("only coefficients flip")
        };
        // entering column for the opposite orientation is -e_r with cost 2
        let td = -2.0;
        for (dj, &tr) in self.d.iter_mut().zip(&self.t[r * p..(r + 1) * p]) {
            *dj -= td * tr;
        }
        for v in &mut self.t[r * p..(r + 1) * p] {
            *v = -*v;
        }
        self.sign[j] = -self.sign[j];
    }

    fn theta(&self) -> Array1<f64> {
        Array1::from_vec(self.coef_value.clone())
    }
}

/// Row-wise box violation of `theta`.
pub fn box_violation(
    a: ArrayView2<'_, f64>,
    lower: ArrayView1<'_, f64>,
    upper: ArrayView1<'_, f64>,
    theta: ArrayView1<'_, f64>,
) -> f64 {
    let at = a.dot(&theta);
    at.iter()
        .zip(lower.iter().zip(upper.iter()))
        .map(|(v, (l, u))| (l - v).max(v - u))
        .fold(0.0_f64, f64::max)
        .max(0.0)
}

/// Solves `min ||theta||_1` s.t. `lower <= A theta <= upper`. Rows with
/// `lazy[i] = true` are only brought in when violated.
pub fn l1_box_simplex<'a>(
    a: ArrayView2<'a, f64>,
    lower: ArrayView1<'a, f64>,
    upper: ArrayView1<'a, f64>,
    lazy: &[bool],
    opts: &SimplexOptions,
) -> Result<SimplexSolution> {
    let (k, p) = a.dim();
    ensure_finite_matrix(a, "constraint matrix")?;
    ensure_finite_vector(lower, "lower bounds")?;
    ensure_finite_vector(upper, "upper bounds")?;
    if lower.len() != k || upper.len() != k || lazy.len() != k {
        return Err(Error::dim(format!(
            "constraint matrix has {k} rows, bounds have {} and {}, lazy flags {}",
            lower.len(),
            upper.len(),
            lazy.len()
        )));
    }
    if lower.iter().zip(upper.iter()).any(|(l, u)| l > u) {
        return Err(Error::input("a lower bound exceeds its upper bound"));
    }
    let mut lp = Dual {
        a,
        lower,
        upper,
        p,
        sign: vec![1.0; p],
        coef_value: vec![0.0; p],
        coef_pos: (0..p).map(Pos::Column).collect(),
        slack_value: vec![0.0; k],
        slack_pos: vec![Pos::Absent; k],
        at_upper: vec![false; k],
        t: Vec::new(),
        norms: Vec::new(),
        basic: Vec::new(),
        column: (0..p).map(Var::Coef).collect(),
        d: vec![1.0; p],
    };
    for i in (0..k).filter(|&i| !lazy[i]) {
        lp.add_row(i);
    }

    let max_pivots = opts.max_pivots.unwrap_or(20 * (k + p));
    let tol = opts.feasibility_tolerance;
    let mut pivots = 0;
    let status = loop {
        // leaving row: largest squared violation relative to the row norm
        let mut leave = None;
        let mut score = 0.0;
        for (r, &v) in lp.basic.iter().enumerate() {
            let inf = lp.infeasibility(v);
            if inf > tol {
                let s = inf * inf / lp.norms[r];
                if s > score {
                    score = s;
                    leave = Some(r);
                }
            }
        }
        let Some(r) = leave else {
            let theta = lp.theta();
            let at = a.dot(&theta);
            let mut added = false;
            for i in 0..k {
                if lp.slack_pos[i] == Pos::Absent && (at[i] < lower[i] - tol || at[i] > upper[i] + tol) {
                    lp.add_row(i);
                    added = true;
                }
            }
            if added {
                continue;
            }
            break LpStatus::Optimal;
        };
        if pivots >= max_pivots {
            break LpStatus::PivotLimit;
        }

        let var = lp.basic[r];
        let (lo, up) = lp.bounds(var);
        let below = lp.value(var) < lo;
        let (target, dir) = if below { (lo, 1.0) } else { (up, -1.0) };

        // Harris two-pass ratio test over the tableau row. A coefficient
        // column can move either way: along its orientation at cost d, or
        // against it at cost 2 - d.
        let row = &lp.t[r * p..(r + 1) * p];
        let candidate = |j: usize| -> Option<(f64, f64, bool)> {
            let trj = row[j];
            if trj.abs() <= opts.pivot_tolerance {
                return None;
            }
            let along = trj * dir < 0.0;
            match lp.column[j] {
                Var::Coef(_) => Some(if along {
                    (lp.d[j].max(0.0), trj.abs(), false)
                } else {
                    ((2.0 - lp.d[j]).max(0.0), trj.abs(), true)
                }),
                Var::Slack(i) => {
                    if lp.lower[i] == lp.upper[i] {
                        return None;
                    }
                    let ok = if lp.at_upper[i] { !along } else { along };
                    ok.then(|| (lp.d[j].abs(), trj.abs(), false))
                }
            }
        };
        let dtol = 1e-12;
        // a basic coefficient below zero may instead pass through zero at cost 2
        let flip_ratio = match var {
            Var::Coef(_) => 2.0,
            Var::Slack(_) => f64::INFINITY,
        };
        let mut bound = flip_ratio + dtol;
        for j in 0..p {
            if let Some((c, t, _)) = candidate(j) {
                bound = bound.min((c + dtol) / t);
            }
        }
        if !bound.is_finite() {
            break LpStatus::Infeasible;
        }
        let mut chosen = None;
        let mut best = 0.0;
        for j in 0..p {
            if let Some((c, t, reverse)) = candidate(j) {
                if c / t <= bound && t > best {
                    best = t;
                    chosen = Some((j, c / t, reverse));
                }
            }
        }
        match chosen {
            Some((q, ratio, reverse)) if ratio <= flip_ratio => {
                if reverse {
                    lp.reverse_column(q);
                }
                lp.pivot(r, q, target, below);
            }
            _ => lp.flip(r),
        }
        pivots += 1;
        lp.clean_reduced_costs();
        if pivots % opts.refresh_every == 0 {
            lp.refresh();
        }
    };
    if status == LpStatus::Optimal {
        lp.refresh();
    }
    let theta = lp.theta();
    let violation = box_violation(a, lower, upper, theta.view());
    Ok(SimplexSolution {
        theta,
        status,
        pivots,
        violation,
    })
}
