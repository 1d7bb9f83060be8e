//! A small Monte Carlo study printed as CSV. The `pptest simulate`
//! command runs the same driver at full scale.
//!
//! Run with `cargo run --release --example simulation_study`.

use projection_pursuit::simulate::{run_study, write_csv, Hypothesis, Study, StudyOverrides};
use projection_pursuit::{Model, TestConfig};

fn main() {
    let ov = StudyOverrides {
        p: Some(vec![60]),
        rho: Some(vec![0.5]),
        models: Some(vec![Model::Linear]),
        hypotheses: Some(vec![Hypothesis::L0, Hypothesis::BetaMin]),
        reps: Some(10),
        bootstrap: Some(200),
        seed: Some(1),
        ..StudyOverrides::default()
    };
    let rows = run_study(Study::Table2, &ov, &TestConfig::default(), |row, res| {
        eprintln!("{}={} done in {:.1}s", row.hypothesis, row.param, res.wall_time.as_secs_f64());
    })
    .unwrap();
    write_csv(&rows, std::io::stdout()).unwrap();
}
