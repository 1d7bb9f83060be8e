//! Command-line front end behind the `pptest` binary.
//!
//! Exit codes: 0 on success (whether or not the null is rejected), 2 for
//! input errors (bad flags, unreadable or malformed files, dimension
//! mismatches), 3 when a solver or the procedure itself fails. Machine
//! readable output goes to stdout or `--out`; stderr carries diagnostics.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::error::Error;
use crate::models::Model;
use crate::pptest::{run_pptest, Dataset, TestConfig};
use crate::projection::{project, NullSet, ProjectionDiagnostics};
use crate::simulate::{run_study, write_csv, Hypothesis, Study, StudyOverrides};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "pptest", version, about = "Projection pursuit tests for high-dimensional regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test `beta* in B0` on a data file.
    Test(TestArgs),
    /// Monte Carlo size/power study; writes CSV.
    Simulate(SimulateArgs),
    /// l1 projection of a vector onto a null set.
    Project(ProjectArgs),
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// CSV with the response in the first column, features after it.
    /// A header row is detected and skipped.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "linear")]
    pub model: String,
    /// l0:<s0>, betamin:<c> or l2ball:<c>
    #[arg(long)]
    pub null: String,
    /// p x p matrix for `l2ball`, giving `||Q b||_2 <= c`; identity if omitted.
    #[arg(long)]
    pub q: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// table1 (size) or table2 (power)
    #[arg(long)]
    pub study: String,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,
    /// Comma-separated dimensions; study default if omitted.
    #[arg(long, value_delimiter = ',')]
    pub p: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub rho: Option<Vec<f64>>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Comma-separated subset of linear,logistic.
    #[arg(long, value_delimiter = ',')]
    pub model: Option<Vec<String>>,
    /// Comma-separated subset of l0,betamin,l2ball.
    #[arg(long, value_delimiter = ',')]
    pub hypothesis: Option<Vec<String>>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV destination; the resolved configuration is written next to it
    /// as `<out>.config.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    /// Numbers separated by commas and/or newlines.
    #[arg(long)]
    pub vector: PathBuf,
    #[arg(long)]
    pub null: String,
    #[arg(long)]
    pub q: Option<PathBuf>,
}

/// Error carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = if e.is_input() || matches!(e.root(), Error::Io(_)) {
            EXIT_INPUT
        } else {
            EXIT_SOLVER
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Test(a) => cmd_test(&a, stdout),
        Command::Simulate(a) => cmd_simulate(&a, stdout, stderr),
        Command::Project(a) => cmd_project(&a, stdout),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message);
            e.code
        }
    }
}

fn open(path: &Path) -> CliResult<File> {
    File::open(path).map_err(|e| CliError::input(format!("cannot open {}: {e}", path.display())))
}

fn write_output(path: Option<&Path>, stdout: &mut dyn Write, bytes: &[u8]) -> CliResult<()> {
    let res = match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| format!("cannot write {}: {e}", p.display())),
        None => stdout.write_all(bytes).map_err(|e| e.to_string()),
    };
    res.map_err(CliError::input)
}

fn to_json<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError {
        code: EXIT_SOLVER,
        message: format!("serializing output: {e}"),
    })?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Reads a numeric CSV. A first row containing a non-numeric field is
/// treated as a header. Errors name the offending line.
pub fn read_matrix<R: Read>(reader: R, what: &str) -> CliResult<Array2<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::input(format!("{what}: {e}")))?;
        let line = rec.position().map_or(k as u64 + 1, |p| p.line());
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: Vec<Option<f64>> = rec.iter().map(|f| f.parse::<f64>().ok()).collect();
        if rows.is_empty() && width.is_none() && parsed.iter().any(Option::is_none) {
            // header row
            width = Some(rec.len());
            continue;
        }
        if let Some(col) = parsed.iter().position(Option::is_none) {
            return Err(CliError::input(format!(
                "{what}: line {line}, column {}: '{}' is not a number",
                col + 1,
                &rec[col]
            )));
        }
        let values: Vec<f64> = parsed.into_iter().flatten().collect();
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(CliError::input(format!("{what}: line {line}, column {}: value is not finite", bad + 1)));
        }
        match width {
            Some(w) if w != values.len() => {
                return Err(CliError::input(format!(
                    "{what}: line {line} has {} fields, expected {w}",
                    values.len()
                )))
            }
            _ => width = Some(values.len()),
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(CliError::input(format!("{what}: no data rows")));
    }
    let w = rows[0].len();
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((rows.len(), w), flat).map_err(|e| CliError::input(format!("{what}: {e}")))
}

/// Splits a data matrix into response (first column) and design.
pub fn read_dataset<R: Read>(reader: R) -> CliResult<Dataset> {
    let m = read_matrix(reader, "data")?;
    if m.ncols() < 2 {
        return Err(CliError::input("data: need a response column and at least one feature"));
    }
    let y = m.column(0).to_owned();
    let x = m.slice(ndarray::s![.., 1..]).to_owned();
    Ok(Dataset::new(x, y)?)
}

fn read_vector(path: &Path) -> CliResult<Array1<f64>> {
    let mut text = String::new();
    open(path)?
        .read_to_string(&mut text)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        for field in line.split(',').map(str::trim).filter(|f| !f.is_empty()) {
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => out.push(v),
                _ => {
                    return Err(CliError::input(format!(
                        "vector: line {}: '{field}' is not a finite number",
                        k + 1
                    )))
                }
            }
        }
    }
    if out.is_empty() {
        return Err(CliError::input("vector: no numbers found"));
    }
    Ok(Array1::from(out))
}

/// Parses `--null` and attaches the optional `--q` matrix.
pub fn resolve_null(spec: &str, q: Option<&Path>, p: usize) -> CliResult<NullSet> {
    let set: NullSet = spec.parse()?;
    let set = match (set, q) {
        (NullSet::QuadraticBall { c, .. }, Some(path)) => {
            let q = read_matrix(open(path)?, "Q")?;
            NullSet::QuadraticBall { q: Some(q), c }
        }
        (_, Some(_)) => return Err(CliError::input("--q only applies to l2ball null sets")),
        (set, None) => set,
    };
    set.validate(p)?;
    if let NullSet::QuadraticBall { q: Some(q), .. } = &set {
        if q.nrows() != p {
            return Err(CliError::input(format!("Q is {}x{}, expected {p}x{p}", q.nrows(), q.ncols())));
        }
    }
    Ok(set)
}

fn cmd_test(a: &TestArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let model: Model = a.model.parse()?;
    let cfg = TestConfig {
        alpha: a.alpha,
        bootstrap_draws: a.bootstrap,
        seed: a.seed,
        ..TestConfig::default()
    };
    cfg.validate()?;
    let data = read_dataset(open(&a.data)?)?;
    let set = resolve_null(&a.null, a.q.as_deref(), data.p())?;
    let result = run_pptest(&data, model, &set, &cfg)?;
    write_output(a.out.as_deref(), stdout, &to_json(&result)?)
}

#[derive(Serialize)]
struct ResolvedStudy<'a> {
    study: Study,
    overrides: &'a StudyOverrides,
    test: &'a TestConfig,
}

fn cmd_simulate(a: &SimulateArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    let study: Study = a.study.parse()?;
    let models = a
        .model
        .as_ref()
        .map(|v| v.iter().map(|s| s.parse::<Model>()).collect::<Result<Vec<_>, _>>())
        .transpose()?;
    let hypotheses = a
        .hypothesis
        .as_ref()
        .map(|v| v.iter().map(|s| s.parse::<Hypothesis>()).collect::<Result<Vec<_>, _>>())
        .transpose()?;
    if a.reps == 0 {
        return Err(CliError::input("--reps must be at least 1"));
    }
    if let Some(rho) = a.rho.as_ref().and_then(|r| r.iter().find(|v| !(0.0..1.0).contains(*v))) {
        return Err(CliError::input(format!("--rho values must lie in [0, 1), got {rho}")));
    }
    if let Some(n) = a.n.filter(|&n| n < 4) {
        return Err(CliError::input(format!("--n must be at least 4, got {n}")));
    }
    let ov = StudyOverrides {
        n: a.n,
        p: a.p.clone(),
        rho: a.rho.clone(),
        models,
        hypotheses,
        reps: Some(a.reps),
        bootstrap: Some(a.bootstrap),
        seed: Some(a.seed),
    };
    let test = TestConfig {
        bootstrap_draws: a.bootstrap,
        ..TestConfig::default()
    };
    test.validate()?;

    let rows = run_study(study, &ov, &test, |row, res| {
        let _ = writeln!(
            stderr,
            "{} p={} rho={} {}={}: rate {:.3} ({} failed, {:.1}s)",
            row.model,
            row.p,
            row.rho,
            row.hypothesis,
            row.param,
            row.rejection_rate,
            res.failures.len(),
            res.wall_time.as_secs_f64()
        );
    })?;
    let mut csv = Vec::new();
    write_csv(&rows, &mut csv)?;
    write_output(a.out.as_deref(), stdout, &csv)?;
    if let Some(out) = &a.out {
        let mut path = out.clone().into_os_string();
        path.push(".config.json");
        let resolved = ResolvedStudy {
            study,
            overrides: &ov,
            test: &test,
        };
        write_output(Some(Path::new(&path)), stdout, &to_json(&resolved)?)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ProjectOutput {
    null_set: String,
    point: Vec<f64>,
    distance: f64,
    diagnostics: ProjectionDiagnostics,
}

fn cmd_project(a: &ProjectArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let v = read_vector(&a.vector)?;
    let set = resolve_null(&a.null, a.q.as_deref(), v.len())?;
    let proj = project(v.view(), &set)?;
    let out = ProjectOutput {
        null_set: set.to_string(),
        point: proj.point.to_vec(),
        distance: proj.distance,
        diagnostics: proj.diagnostics,
    };
    write_output(None, stdout, &to_json(&out)?)
}

/// Entry point used by the binary.
pub fn main() -> i32 {
    let stdout = io::stdout();
    let stderr = io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
