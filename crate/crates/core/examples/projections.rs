//! l1 projections onto each null family, plus a user-supplied oracle.
//!
//! Run with `cargo run --example projections`.

use ndarray::{array, Array1};
use projection_pursuit::projection::{project, rho_threshold, NullSet};

fn show(label: &str, v: &Array1<f64>, set: &NullSet) {
    let p = project(v.view(), set).expect("projection");
    println!("{label:<28} {v} -> {:.4}  (l1 distance {:.4})", p.point, p.distance);
}

fn main() {
    let v = array![3.0, -1.0, 2.0, 0.4];

    show("sparsity, s0 = 2", &v, &NullSet::L0Ball { s0: 2 });
    show("beta-min, c = 1.5", &v, &NullSet::BetaMin { c: 1.5 });
    show("l2 ball, c = 2", &v, &NullSet::QuadraticBall { q: None, c: 2.0 });

    // ||Q b||_2 <= c with a diagonal Q weighting the first coordinate
    let q = ndarray::Array2::from_diag(&array![2.0, 1.0, 1.0, 1.0]);
    show("weighted ball, c = 3", &v, &NullSet::QuadraticBall { q: Some(q), c: 3.0 });

    // members of the null are fixed points
    show("already sparse", &array![0.0, 5.0, 0.0, 0.0], &NullSet::L0Ball { s0: 1 });

    // the beta-min rule, entry by entry
    for a in [0.3, 0.6, 1.2] {
        println!("rho({a}, 1) = {}", rho_threshold(a, 1.0));
    }

    // sign-constrained set {b >= 0}: its l1 projection clips negatives
    let nonneg = NullSet::custom("nonnegative", |v| {
        let point = v.mapv(|x| x.max(0.0));
        let dist = v.iter().map(|x| (-x).max(0.0)).sum();
        Ok((point, dist))
    });
    show("custom oracle (b >= 0)", &v, &nonneg);
}
