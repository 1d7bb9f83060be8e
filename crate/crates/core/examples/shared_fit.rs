//! Fit once, test many nulls: the initial estimate, precision matrix and
//! bootstrap draws do not depend on the null, so a rejection curve over a
//! family of nulls costs one fit.
//!
//! Run with `cargo run --release --example shared_fit`.

use projection_pursuit::simulate::{generate_dataset, Hypothesis, SimConfig};
use projection_pursuit::{Model, PreparedTest, TestConfig};

fn main() {
    let cfg = SimConfig {
        p: 150,
        rho: 0.5,
        ..SimConfig::default()
    };
    let data = generate_dataset(&cfg, 5).unwrap();
    let prepared = PreparedTest::new(&data, Model::Linear, &TestConfig::default()).unwrap();
    println!("critical value {:.3}", prepared.critical_value);

    let family = [
        (Hypothesis::L0, [4.0, 3.0, 2.0, 1.0]),
        (Hypothesis::BetaMin, [1.0, 1.2, 1.4, 1.6]),
        (Hypothesis::L2Ball, [2.0, 1.2, 1.0, 0.9]),
    ];
    for (h, params) in family {
        let line: Vec<String> = params
            .iter()
            .map(|&v| {
                let r = prepared.test(&h.null_set(v).unwrap()).unwrap();
                format!("{v}: T={:.2}{}", r.t_n, if r.reject { " *" } else { "" })
            })
            .collect();
        println!("{h:<8} {}", line.join("  "));
    }
}
