//! l1 projections onto null sets.
//!
//! For a null set `B0` and a point `v` the projection is any
//! `argmin_{b in B0} ||b - v||_1`. Sparsity balls and beta-min sets have
//! closed forms (keep the largest entries; threshold entrywise).
//! Quadratic balls `{b : ||Q b||_2 <= c}` reduce to a one-dimensional search
//! along the Lasso path `t -> a(t) = argmin ||Q v + Q a||^2 + t ||a||_1`,
//! whose l1 norm shrinks as `t` grows while `||Q (v + a(t))||` grows.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite_matrix, ensure_finite_vector, l1_norm, max_abs};
use crate::solvers::{quadratic_cd, SolverOptions};

/// User-supplied projection: returns `(point, l1 distance)`.
pub type ProjectionOracle = Arc<dyn Fn(ArrayView1<'_, f64>) -> Result<(Array1<f64>, f64)> + Send + Sync>;

#[derive(Clone)]
pub enum NullSet {
    /// `||b||_0 <= s0`
    L0Ball { s0: usize },
    /// every nonzero entry has magnitude at least `c`
    BetaMin { c: f64 },
    /// `||Q b||_2 <= c`; `q = None` means the identity.
    QuadraticBall { q: Option<Array2<f64>>, c: f64 },
    Custom { name: String, oracle: ProjectionOracle },
}

impl fmt::Debug for NullSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NullSet::L0Ball { s0 } => f.debug_struct("L0Ball").field("s0", s0).finish(),
            NullSet::BetaMin { c } => f.debug_struct("BetaMin").field("c", c).finish(),
            NullSet::QuadraticBall { q, c } => f
                .debug_struct("QuadraticBall")
                .field("q", &q.as_ref().map(|m| m.dim()))
                .field("c", c)
                .finish(),
            NullSet::Custom { name, .. } => f.debug_struct("Custom").field("name", name).finish(),
        }
    }
}

/// `l0:<s0>`, `betamin:<c>`, `l2ball:<c>` (identity `Q`), `custom:<name>`.
impl fmt::Display for NullSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NullSet::L0Ball { s0 } => write!(f, "l0:{s0}"),
            NullSet::BetaMin { c } => write!(f, "betamin:{c}"),
            NullSet::QuadraticBall { q: None, c } => write!(f, "l2ball:{c}"),
            NullSet::QuadraticBall { q: Some(_), c } => write!(f, "qball:{c}"),
            NullSet::Custom { name, .. } => write!(f, "custom:{name}"),
        }
    }
}

impl FromStr for NullSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, value) = s
            .split_once(':')
            .ok_or_else(|| Error::input(format!("null set '{s}' is not of the form kind:value")))?;
        let positive = |v: &str| -> Result<f64> {
            match v.trim().parse::<f64>() {
                Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
                _ => Err(Error::input(format!("'{v}' is not a positive number in null set '{s}'"))),
            }
        };
        match kind.trim() {
            "l0" => value
                .trim()
                .parse::<usize>()
                .map(|s0| NullSet::L0Ball { s0 })
                .map_err(|_| Error::input(format!("'{value}' is not a nonnegative integer"))),
            "betamin" => Ok(NullSet::BetaMin { c: positive(value)? }),
            "l2ball" | "qball" => Ok(NullSet::QuadraticBall {
                q: None,
                c: positive(value)?,
            }),
            other => Err(Error::input(format!("unknown null set kind '{other}'"))),
        }
    }
}

impl NullSet {
    pub fn custom<F>(name: impl Into<String>, oracle: F) -> Self
    where
        F: Fn(ArrayView1<'_, f64>) -> Result<(Array1<f64>, f64)> + Send + Sync + 'static,
    {
        NullSet::Custom {
            name: name.into(),
            oracle: Arc::new(oracle),
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        match self {
            NullSet::L0Ball { .. } | NullSet::Custom { .. } => Ok(()),
            NullSet::BetaMin { c } => positive_radius(*c),
            NullSet::QuadraticBall { q, c } => {
                positive_radius(*c)?;
                if let Some(q) = q {
                    ensure_finite_matrix(q.view(), "Q")?;
                    if q.ncols() != p {
                        return Err(Error::dim(format!(
                            "Q has {} columns but the vector has length {p}",
                            q.ncols()
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    /// Membership test with relative slack `tol`; `None` for custom sets.
    pub fn contains(&self, v: ArrayView1<'_, f64>, tol: f64) -> Option<bool> {
        match self {
            NullSet::L0Ball { s0 } => Some(v.iter().filter(|x| **x != 0.0).count() <= *s0),
            NullSet::BetaMin { c } => Some(v.iter().all(|x| *x == 0.0 || x.abs() >= c * (1.0 - tol))),
            NullSet::QuadraticBall { q, c } => Some(quadratic_norm(q.as_ref().map(|m| m.view()), v) <= c * (1.0 + tol)),
            NullSet::Custom { .. } => None,
        }
    }
}

fn positive_radius(c: f64) -> Result<()> {
    if c > 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(Error::input(format!("null-set radius must be positive, got {c}")))
    }
}

fn quadratic_norm(q: Option<ArrayView2<'_, f64>>, v: ArrayView1<'_, f64>) -> f64 {
    match q {
        Some(q) => {
            let w = q.dot(&v);
            w.dot(&w).sqrt()
        }
        None => v.dot(&v).sqrt(),
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProjectionDiagnostics {
    pub method: String,
    /// Penalty level selected on the Lasso path (quadratic balls only).
    pub t_star: Option<f64>,
    /// Times the Lasso-path grid was extended towards zero.
    pub refinements: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub point: Array1<f64>,
    /// `||point - v||_1`
    pub distance: f64,
    pub diagnostics: ProjectionDiagnostics,
}

impl Projection {
    fn new(v: ArrayView1<'_, f64>, point: Array1<f64>, method: &str) -> Self {
        let distance = l1_distance(point.view(), v);
        Projection {
            point,
            distance,
            diagnostics: ProjectionDiagnostics {
                method: method.to_owned(),
                ..Default::default()
            },
        }
    }
}

fn l1_distance(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum()
}

/// Projects `v` onto `set` in l1 distance.
pub fn project(v: ArrayView1<'_, f64>, set: &NullSet) -> Result<Projection> {
    ensure_finite_vector(v, "vector")?;
    set.validate(v.len())?;
    match set {
        NullSet::L0Ball { s0 } => Ok(project_l0(v, *s0)),
        NullSet::BetaMin { c } => project_betamin(v, *c),
        NullSet::QuadraticBall { q, c } => {
            project_quadratic(v, q.as_ref().map(|m| m.view()), *c, &QuadraticGrid::default())
        }
        NullSet::Custom { name, oracle } => {
            let (point, distance) = oracle(v)?;
            if point.len() != v.len() {
                return Err(Error::Contract(format!(
                    "oracle '{name}' returned a point of length {} for input of length {}",
                    point.len(),
                    v.len()
                )));
            }
            let actual = l1_distance(point.view(), v);
            if !((distance - actual).abs() <= 1e-9 * (1.0 + actual)) {
                return Err(Error::Contract(format!(
                    "oracle '{name}' reported distance {distance} but the point is at {actual}"
                )));
            }
            let mut out = Projection::new(v, point, "custom");
            out.diagnostics.method = format!("custom:{name}");
            Ok(out)
        }
    }
}

/// `project(v, set).distance`.
pub fn l1_distance_to_null(v: ArrayView1<'_, f64>, set: &NullSet) -> Result<f64> {
    project(v, set).map(|p| p.distance)
}

/// Keeps the `s0` entries of largest magnitude; equal magnitudes are
/// resolved in favour of the lower index.
pub fn project_l0(v: ArrayView1<'_, f64>, s0: usize) -> Projection {
    let p = v.len();
    if s0 >= p {
        return Projection::new(v, v.to_owned(), "l0");
    }
    let mut order: Vec<usize> = (0..p).collect();
    // stable sort keeps lower indices first among ties
    order.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()));
    let mut point = Array1::zeros(p);
    for &j in &order[..s0] {
        point[j] = v[j];
    }
    Projection::new(v, point, "l0")
}

/// Beta-min thresholding rule: entries with `|a| >= c` pass through, entries
/// with `c/2 <= |a| < c` snap to `sign(a) c`, smaller entries vanish.
pub fn rho_threshold(a: f64, c: f64) -> f64 {
    let m = a.abs();
    if m >= c {
        a
    } else if m >= 0.5 * c {
        c.copysign(a)
    } else {
        0.0
    }
}

pub fn project_betamin(v: ArrayView1<'_, f64>, c: f64) -> Result<Projection> {
    positive_radius(c)?;
    Ok(Projection::new(v, v.mapv(|a| rho_threshold(a, c)), "betamin"))
}

/// Search settings for quadratic-ball projections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticGrid {
    pub points: usize,
    pub lower: f64,
    pub bisection_steps: usize,
    /// Each refinement lowers the smallest grid value by a factor `1e-6`.
    pub max_refinements: usize,
    pub solver: SolverOptions,
}

impl Default for QuadraticGrid {
    fn default() -> Self {
        Self {
            points: 100,
            lower: 1e-6,
            bisection_steps: 40,
            max_refinements: 4,
            solver: SolverOptions {
                max_iterations: 100_000,
                tolerance: 1e-12,
                warm_start: None,
            },
        }
    }
}

/// l1 projection onto `{b : ||Q b||_2 <= c}` (`q = None` for the identity).
pub fn project_quadratic(
    v: ArrayView1<'_, f64>,
    q: Option<ArrayView2<'_, f64>>,
    c: f64,
    grid: &QuadraticGrid,
) -> Result<Projection> {
    positive_radius(c)?;
    ensure_finite_vector(v, "vector")?;
    let p = v.len();
    if let Some(q) = q {
        ensure_finite_matrix(q, "Q")?;
        if q.ncols() != p {
            return Err(Error::dim(format!("Q has {} columns, vector has length {p}", q.ncols())));
        }
    }
    if grid.points < 2 {
        return Err(Error::input("quadratic projection grid needs at least 2 points"));
    }
    if quadratic_norm(q, v) <= c {
        return Ok(Projection::new(v, v.to_owned(), "quadratic"));
    }

    // ||Q v + Q a||^2 + t ||a||_1 written as 0.5 a^T G a - lin^T a
    let qtq = match q {
        Some(q) => q.t().dot(&q),
        None => Array2::eye(p),
    };
    let gram = &qtq * 2.0;
    let lin = qtq.dot(&v) * -2.0;
    let t_zero = max_abs(lin.view());
    let t_top = 2.0 * t_zero;

    let feasible_norm = |a: &Array1<f64>| quadratic_norm(q, (&v + a).view());
    let solve = |t: f64, warm: &Array1<f64>| {
        let opts = SolverOptions {
            warm_start: Some(warm.clone()),
            ..grid.solver.clone()
        };
        quadratic_cd(gram.view(), lin.view(), t, &opts).coefficients
    };

    let mut lower = grid.lower.min(t_top * 1e-6);
    let mut refinements = 0;
    let mut hi = (t_top, Array1::<f64>::zeros(p));
    let (lo_t, lo_a) = loop {
        let ratio = (lower / hi.0).ln() / (grid.points - 1) as f64;
        let mut found = None;
        let mut prev = hi.clone();
        for k in 1..grid.points {
            let t = hi.0 * (ratio * k as f64).exp();
            let a = solve(t, &prev.1);
            if feasible_norm(&a) <= c {
                found = Some((t, a));
                break;
            }
            prev = (t, a);
        }
        match found {
            Some(lo) => {
                hi = prev;
                break lo;
            }
            None if refinements < grid.max_refinements => {
                refinements += 1;
                hi = prev;
                lower *= 1e-6;
            }
            None => {
                return Err(Error::NonConvergence(format!(
                    "no feasible point on the Lasso path down to t = {lower:e}; \
                     the ball may not be reachable along the path"
                )))
            }
        }
    };

    // bisection on log t between the bracketing grid points
    let (mut t_lo, mut a_lo) = (lo_t, lo_a);
    let mut t_hi = hi.0;
    for _ in 0..grid.bisection_steps {
        let mid = (t_lo * t_hi).sqrt();
        let a = solve(mid, &a_lo);
        if feasible_norm(&a) <= c {
            t_lo = mid;
            a_lo = a;
        } else {
            t_hi = mid;
        }
    }
    let point = &v + &a_lo;
    let mut out = Projection::new(v, point, "quadratic");
    out.diagnostics.t_star = Some(t_lo);
    out.diagnostics.refinements = refinements;
    debug_assert!(l1_norm(a_lo.view()).is_finite());
    Ok(out)
}
