//! Gaussian-design data generation and Monte Carlo rejection rates.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::models::{logistic_link, Model};
use crate::pptest::{Dataset, PreparedTest, TestConfig};
use crate::projection::NullSet;
use crate::seeds;

/// Which null family a simulation cell tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hypothesis {
    /// `||b||_0 <= s0`
    L0,
    /// nonzero entries at least `r0` in magnitude
    BetaMin,
    /// `||b||_2 <= c0`
    L2Ball,
}

impl Hypothesis {
    pub const ALL: [Hypothesis; 3] = [Hypothesis::L0, Hypothesis::BetaMin, Hypothesis::L2Ball];

    pub fn null_set(self, param: f64) -> Result<NullSet> {
        match self {
            Hypothesis::L0 => {
                if param < 0.0 || param.fract() != 0.0 {
                    return Err(Error::input(format!("s0 must be a nonnegative integer, got {param}")));
                }
                Ok(NullSet::L0Ball { s0: param as usize })
            }
            Hypothesis::BetaMin => Ok(NullSet::BetaMin { c: param }),
            Hypothesis::L2Ball => Ok(NullSet::QuadraticBall { q: None, c: param }),
        }
    }
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Hypothesis::L0 => "l0",
            Hypothesis::BetaMin => "betamin",
            Hypothesis::L2Ball => "l2ball",
        })
    }
}

impl FromStr for Hypothesis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "l0" => Ok(Hypothesis::L0),
            "betamin" => Ok(Hypothesis::BetaMin),
            "l2ball" | "l2" => Ok(Hypothesis::L2Ball),
            other => Err(Error::input(format!("unknown hypothesis '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub model: Model,
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    /// Number of leading coefficients equal to one.
    pub signal: usize,
    pub hypothesis: Hypothesis,
    /// `s0`, `r0` or `c0` depending on the hypothesis.
    pub param: f64,
    /// Appends a column of ones with true coefficient zero.
    pub intercept: bool,
    pub reps: usize,
    pub test: TestConfig,
    pub master_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            model: Model::Linear,
            n: 200,
            p: 200,
            rho: 0.0,
            signal: 4,
            hypothesis: Hypothesis::L0,
            param: 4.0,
            intercept: false,
            reps: 100,
            test: TestConfig::default(),
            master_seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.signal > self.p {
            return Err(Error::input(format!("signal size {} exceeds p = {}", self.signal, self.p)));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::input(format!("rho must lie in [0, 1), got {}", self.rho)));
        }
        if self.reps == 0 {
            return Err(Error::input("reps must be at least 1"));
        }
        if self.n < 4 {
            return Err(Error::input(format!("n must be at least 4, got {}", self.n)));
        }
        self.hypothesis.null_set(self.param)?;
        Ok(())
    }

    /// Number of columns in generated designs.
    pub fn width(&self) -> usize {
        self.p + usize::from(self.intercept)
    }

    pub fn beta_star(&self) -> Array1<f64> {
        Array1::from_shape_fn(self.width(), |j| if j < self.signal { 1.0 } else { 0.0 })
    }
}

/// `Sigma_ij = rho^|i - j|`.
pub fn toeplitz_covariance(p: usize, rho: f64) -> Result<Array2<f64>> {
    if !(rho.abs() < 1.0) {
        return Err(Error::input(format!("|rho| must be below 1, got {rho}")));
    }
    Ok(Array2::from_shape_fn((p, p), |(i, j)| rho.powi(i.abs_diff(j) as i32)))
}

/// Lower Cholesky factor; errors when `sigma` is not positive definite.
pub fn cholesky_factor(sigma: &Array2<f64>) -> Result<Array2<f64>> {
    linalg::cholesky(sigma.view())
}

fn generate_with_factor(cfg: &SimConfig, l: &Array2<f64>, rep_seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(rep_seed);
    let z = Array2::from_shape_simple_fn((cfg.n, cfg.p), || rng.sample::<f64, _>(StandardNormal));
    let mut x = z.dot(&l.t());
    if cfg.intercept {
        x = ndarray::concatenate![ndarray::Axis(1), x, Array2::ones((cfg.n, 1))];
    }
    let eta = x.dot(&cfg.beta_star());
    let y = match cfg.model {
        Model::Linear => eta.mapv(|e| e + rng.sample::<f64, _>(StandardNormal)),
        Model::Logistic => eta.mapv(|e| {
            let u: f64 = rng.gen();
            if u <= logistic_link(e).1 {
                1.0
            } else {
                0.0
            }
        }),
    };
    Dataset { x, y }
}

/// `X = Z L^T` with standard normal `Z`; the response follows `cfg.model`.
pub fn generate_dataset(cfg: &SimConfig, rep_seed: u64) -> Result<Dataset> {
    cfg.validate()?;
    let l = cholesky_factor(&toeplitz_covariance(cfg.p, cfg.rho)?)?;
    Ok(generate_with_factor(cfg, &l, rep_seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepOutcome {
    pub rep: usize,
    pub seed: u64,
    pub t_n: f64,
    pub critical_value: f64,
    pub reject: bool,
    pub delta_thresholded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepFailure {
    pub rep: usize,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    /// Mean of the reject flags over successful replications.
    pub rejection_rate: f64,
    pub per_rep: Vec<RepOutcome>,
    pub failures: Vec<RepFailure>,
    pub wall_time: Duration,
}

/// Largest tolerated fraction of failed replications.
pub const MAX_FAILURE_RATE: f64 = 0.05;

/// Seed for replication `rep`: data come from this seed and the bootstrap
/// from a child of it.
pub fn rep_seed(master: u64, rep: usize) -> u64 {
    seeds::derive(master, rep as u64)
}

/// Runs `cfg.reps` independent replications, in parallel, ordered by index.
pub fn monte_carlo(cfg: &SimConfig) -> Result<SimResult> {
    let mut out = monte_carlo_nulls(cfg, &[(cfg.hypothesis, cfg.param)])?;
    Ok(out.remove(0))
}

/// Like [`monte_carlo`] but tests several nulls on every replication.
///
/// The initial estimate, precision matrices and bootstrap draws are computed
/// once per replication and shared, so the rates of different nulls are
/// driven by the same samples. `cfg.hypothesis` and `cfg.param` are ignored.
pub fn monte_carlo_nulls(cfg: &SimConfig, nulls: &[(Hypothesis, f64)]) -> Result<Vec<SimResult>> {
    cfg.validate()?;
    if nulls.is_empty() {
        return Err(Error::input("no null hypotheses to test"));
    }
    let sets = nulls
        .iter()
        .map(|&(h, v)| h.null_set(v))
        .collect::<Result<Vec<_>>>()?;
    let start = Instant::now();
    let l = cholesky_factor(&toeplitz_covariance(cfg.p, cfg.rho)?)?;
    let outcomes: Vec<Vec<std::result::Result<RepOutcome, RepFailure>>> = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| {
            let seed = rep_seed(cfg.master_seed, rep);
            let data = generate_with_factor(cfg, &l, seed);
            let mut test = cfg.test.clone();
            test.seed = seeds::derive(seed, 0);
            let fail = |e: Error| RepFailure {
                rep,
                seed,
                message: e.to_string(),
            };
            let prepared = match PreparedTest::new(&data, cfg.model, &test) {
                Ok(p) => p,
                Err(e) => {
                    let f = fail(e);
                    return vec![Err(f); sets.len()];
                }
            };
            sets.iter()
                .map(|set| {
                    prepared
                        .test(set)
                        .map(|r| RepOutcome {
                            rep,
                            seed,
                            t_n: r.t_n,
                            critical_value: r.critical_value,
                            reject: r.reject,
                            delta_thresholded: r.delta_thresholded,
                        })
                        .map_err(fail)
                })
                .collect()
        })
        .collect();
    let wall_time = start.elapsed();

    let mut results = Vec::with_capacity(sets.len());
    for k in 0..sets.len() {
        let mut per_rep = Vec::new();
        let mut failures = Vec::new();
        for rep in &outcomes {
            match &rep[k] {
                Ok(r) => per_rep.push(r.clone()),
                Err(f) => failures.push(f.clone()),
            }
        }
        if failures.len() as f64 > MAX_FAILURE_RATE * cfg.reps as f64 {
            return Err(Error::NonConvergence(format!(
                "{} of {} replications failed for {} (first: rep {}: {})",
                failures.len(),
                cfg.reps,
                sets[k],
                failures[0].rep,
                failures[0].message
            )));
        }
        let rejection_rate = if per_rep.is_empty() {
            0.0
        } else {
            per_rep.iter().filter(|r| r.reject).count() as f64 / per_rep.len() as f64
        };
        results.push(SimResult {
            rejection_rate,
            per_rep,
            failures,
            wall_time,
        });
    }
    Ok(results)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Study {
    /// Size: `p x rho x` hypotheses x models at the null boundary.
    Table1,
    /// Power: `rho = 0.5`, parameters moving away from the truth.
    Table2,
}

impl FromStr for Study {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "table1" => Ok(Study::Table1),
            "table2" => Ok(Study::Table2),
            other => Err(Error::input(format!("unknown study '{other}' (expected table1 or table2)"))),
        }
    }
}

/// Desk-scale reductions of a study; `None` keeps the study default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StudyOverrides {
    pub n: Option<usize>,
    pub p: Option<Vec<usize>>,
    pub rho: Option<Vec<f64>>,
    pub models: Option<Vec<Model>>,
    pub hypotheses: Option<Vec<Hypothesis>>,
    pub reps: Option<usize>,
    pub bootstrap: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyCell {
    pub p: usize,
    pub rho: f64,
    pub hypothesis: Hypothesis,
    pub model: Model,
    pub param: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub p: usize,
    pub rho: f64,
    pub hypothesis: Hypothesis,
    pub model: Model,
    pub param: f64,
    pub rejection_rate: f64,
    pub reps: usize,
    #[serde(rename = "B")]
    pub b: usize,
    pub seed: u64,
}

fn table2_params(h: Hypothesis) -> [f64; 4] {
    match h {
        Hypothesis::L0 => [4.0, 3.0, 2.0, 1.0],
        Hypothesis::BetaMin => [1.0, 1.2, 1.4, 1.6],
        Hypothesis::L2Ball => [2.0, 1.2, 1.0, 0.9],
    }
}

fn table1_param(h: Hypothesis) -> f64 {
    match h {
        Hypothesis::L0 => 4.0,
        Hypothesis::BetaMin => 1.0,
        Hypothesis::L2Ball => 2.0,
    }
}

/// Cells of a study after applying overrides, in output order.
pub fn study_cells(study: Study, ov: &StudyOverrides) -> Vec<StudyCell> {
    let models = ov.models.clone().unwrap_or_else(|| vec![Model::Linear, Model::Logistic]);
    let hyps = ov.hypotheses.clone().unwrap_or_else(|| Hypothesis::ALL.to_vec());
    let mut cells = Vec::new();
    match study {
        Study::Table1 => {
            let ps = ov.p.clone().unwrap_or_else(|| vec![200, 350, 500]);
            let rhos = ov.rho.clone().unwrap_or_else(|| vec![0.0, 0.25, 0.5, 0.75]);
            for &model in &models {
                for &hypothesis in &hyps {
                    for &p in &ps {
                        for &rho in &rhos {
                            cells.push(StudyCell {
                                p,
                                rho,
                                hypothesis,
                                model,
                                param: table1_param(hypothesis),
                            });
                        }
                    }
                }
            }
        }
        Study::Table2 => {
            let ps = ov.p.clone().unwrap_or_else(|| vec![500]);
            let rhos = ov.rho.clone().unwrap_or_else(|| vec![0.5]);
            for &model in &models {
                for &hypothesis in &hyps {
                    for &p in &ps {
                        for &rho in &rhos {
                            for param in table2_params(hypothesis) {
                                cells.push(StudyCell {
                                    p,
                                    rho,
                                    hypothesis,
                                    model,
                                    param,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    cells
}

/// Runs every cell of a study. `progress` is called after each cell.
///
/// Cells sharing a model, `p` and `rho` are evaluated on the same simulated
/// replications (see [`monte_carlo_nulls`]); group `g` in output order uses
/// master seed `derive(seed, g)`, which is reported in every row.
pub fn run_study(
    study: Study,
    ov: &StudyOverrides,
    base_test: &TestConfig,
    mut progress: impl FnMut(&StudyRow, &SimResult),
) -> Result<Vec<StudyRow>> {
    let reps = ov.reps.unwrap_or(100);
    let seed = ov.seed.unwrap_or(0);
    let mut test = base_test.clone();
    if let Some(b) = ov.bootstrap {
        test.bootstrap_draws = b;
    }
    let cells = study_cells(study, ov);
    let mut groups: Vec<(Model, usize, f64)> = Vec::new();
    for c in &cells {
        let key = (c.model, c.p, c.rho);
        if !groups.contains(&key) {
            groups.push(key);
        }
    }
    let mut rows: Vec<Option<StudyRow>> = vec![None; cells.len()];
    for (g, &(model, p, rho)) in groups.iter().enumerate() {
        let members: Vec<usize> = (0..cells.len())
            .filter(|&i| (cells[i].model, cells[i].p, cells[i].rho) == (model, p, rho))
            .collect();
        let nulls: Vec<(Hypothesis, f64)> = members.iter().map(|&i| (cells[i].hypothesis, cells[i].param)).collect();
        let cfg = SimConfig {
            model,
            n: ov.n.unwrap_or(200),
            p,
            rho,
            hypothesis: nulls[0].0,
            param: nulls[0].1,
            reps,
            test: test.clone(),
            master_seed: seeds::derive(seed, g as u64),
            ..SimConfig::default()
        };
        for (i, res) in members.into_iter().zip(monte_carlo_nulls(&cfg, &nulls)?) {
            let cell = &cells[i];
            let row = StudyRow {
                p: cell.p,
                rho: cell.rho,
                hypothesis: cell.hypothesis,
                model: cell.model,
                param: cell.param,
                rejection_rate: res.rejection_rate,
                reps,
                b: test.bootstrap_draws,
                seed: cfg.master_seed,
            };
            progress(&row, &res);
            rows[i] = Some(row);
        }
    }
    Ok(rows.into_iter().flatten().collect())
}

/// Writes rows with header `p,rho,hypothesis,model,param,rejection_rate,reps,B,seed`.
pub fn write_csv<W: Write>(rows: &[StudyRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["p", "rho", "hypothesis", "model", "param", "rejection_rate", "reps", "B", "seed"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.p.to_string(),
            r.rho.to_string(),
            r.hypothesis.to_string(),
            r.model.to_string(),
            r.param.to_string(),
            r.rejection_rate.to_string(),
            r.reps.to_string(),
            r.b.to_string(),
            r.seed.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::input(format!("{other:?}")),
    }
}
