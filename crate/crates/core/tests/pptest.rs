use ndarray::{Array1, Array2};
use projection_pursuit::pptest::{bootstrap_quantile, bootstrap_statistics, p_value};
use projection_pursuit::simulate::{generate_dataset, monte_carlo, monte_carlo_nulls, Hypothesis, SimConfig};
use projection_pursuit::{run_pptest, Model, NullSet, PreparedTest, TestConfig};
use proptest::prelude::*;

fn matrix(n: usize, p: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(-3.0f64..3.0, n * p).prop_map(move |v| Array2::from_shape_vec((n, p), v).unwrap())
}

fn draws_of(r: &Array2<f64>, b: usize, seed: u64) -> Vec<f64> {
    let star = r.mean_axis(ndarray::Axis(0)).unwrap();
    bootstrap_statistics(r.view(), star.view(), b, seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn negating_influence_vectors_changes_nothing(r in matrix(12, 5), seed in any::<u64>()) {
        prop_assert_eq!(draws_of(&r, 100, seed), draws_of(&r.mapv(|v| -v), 100, seed));
    }

    #[test]
    fn draws_scale_with_influence_vectors(r in matrix(10, 4), k in -3i32..4, seed in any::<u64>()) {
        let kappa = 2f64.powi(k);
        let base = draws_of(&r, 100, seed);
        let scaled = draws_of(&(&r * kappa), 100, seed);
        for (a, b) in base.iter().zip(&scaled) {
            prop_assert_eq!(a * kappa, *b);
        }
        prop_assert_eq!(bootstrap_quantile(&base, 0.1) * kappa, bootstrap_quantile(&scaled, 0.1));
    }

    #[test]
    fn quantile_monotone_in_alpha(draws in prop::collection::vec(0.0f64..10.0, 1..300), a in 0.001f64..0.999, b in 0.001f64..0.999) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(bootstrap_quantile(&draws, lo) >= bootstrap_quantile(&draws, hi));
    }

    #[test]
    fn p_value_range(draws in prop::collection::vec(0.0f64..10.0, 1..300), t in 0.0f64..12.0) {
        let p = p_value(&draws, t);
        let b = draws.len() as f64;
        prop_assert!(p >= 1.0 / (b + 1.0) && p <= 1.0);
    }
}

#[test]
fn identical_rows_give_zero_draws() {
    let r = Array2::from_shape_fn((9, 3), |(_, j)| 0.3 + j as f64);
    assert!(draws_of(&r, 200, 5).iter().all(|&t| t == 0.0));
}

#[test]
fn draws_do_not_depend_on_thread_count() {
    let r = Array2::from_shape_fn((40, 7), |(i, j)| ((i * 7 + j) as f64).sin());
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| draws_of(&r, 300, 9));
    let b = four.install(|| draws_of(&r, 300, 9));
    assert_eq!(a, b);
}

fn small_config() -> SimConfig {
    SimConfig {
        n: 80,
        p: 30,
        rho: 0.25,
        reps: 4,
        test: TestConfig {
            bootstrap_draws: 200,
            ..TestConfig::default()
        },
        ..SimConfig::default()
    }
}

#[test]
fn run_is_bit_reproducible() {
    for model in [Model::Linear, Model::Logistic] {
        let cfg = SimConfig { model, ..small_config() };
        let data = generate_dataset(&cfg, 3).unwrap();
        let test = TestConfig { seed: 17, bootstrap_draws: 200, ..TestConfig::default() };
        let set = NullSet::BetaMin { c: 1.0 };
        let a = run_pptest(&data, model, &set, &test).unwrap();
        let b = run_pptest(&data, model, &set, &test).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.reject, a.t_n > a.critical_value);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}

#[test]
fn prepared_test_matches_run_pptest() {
    let cfg = small_config();
    let data = generate_dataset(&cfg, 8).unwrap();
    let test = TestConfig { bootstrap_draws: 200, ..TestConfig::default() };
    let prepared = PreparedTest::new(&data, Model::Linear, &test).unwrap();
    for set in [NullSet::L0Ball { s0: 2 }, NullSet::QuadraticBall { q: None, c: 1.0 }] {
        assert_eq!(prepared.test(&set).unwrap(), run_pptest(&data, Model::Linear, &set, &test).unwrap());
    }
}

#[test]
fn statistic_bounded_when_projection_is_a_fixed_point() {
    // beta_u already in the null: T_n = sqrt(n) ||delta_hat||_inf <= n^(1/4)
    let cfg = small_config();
    let data = generate_dataset(&cfg, 2).unwrap();
    let test = TestConfig { bootstrap_draws: 200, ..TestConfig::default() };
    let r = run_pptest(&data, Model::Linear, &NullSet::L0Ball { s0: 30 }, &test).unwrap();
    assert_eq!(r.beta_u, r.beta_d);
    assert!(r.t_n <= (80f64).powf(0.25) + 1e-12);
}

#[test]
fn monte_carlo_is_thread_count_independent() {
    let cfg = small_config();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let a = one.install(|| monte_carlo(&cfg).unwrap());
    let b = three.install(|| monte_carlo(&cfg).unwrap());
    assert_eq!(a.per_rep, b.per_rep);
    assert_eq!(a.rejection_rate, b.rejection_rate);
    let flags = a.per_rep.iter().filter(|r| r.reject).count() as f64;
    assert_eq!(a.rejection_rate, flags / a.per_rep.len() as f64);
}

#[test]
fn shared_replications_match_single_null_runs() {
    let cfg = small_config();
    let nulls = [(Hypothesis::L0, 4.0), (Hypothesis::L2Ball, 1.0)];
    let joint = monte_carlo_nulls(&cfg, &nulls).unwrap();
    for (&(h, v), res) in nulls.iter().zip(&joint) {
        let single = monte_carlo(&SimConfig { hypothesis: h, param: v, ..cfg.clone() }).unwrap();
        assert_eq!(single.per_rep, res.per_rep);
    }
}

#[test]
fn rejects_bad_configuration() {
    let cfg = small_config();
    let data = generate_dataset(&cfg, 1).unwrap();
    let bad = TestConfig { alpha: 1.5, ..TestConfig::default() };
    assert!(run_pptest(&data, Model::Linear, &NullSet::L0Ball { s0: 1 }, &bad).unwrap_err().is_input());
    let few = TestConfig { bootstrap_draws: 10, ..TestConfig::default() };
    assert!(run_pptest(&data, Model::Linear, &NullSet::L0Ball { s0: 1 }, &few).unwrap_err().is_input());
    let labels = projection_pursuit::Dataset::new(data.x.clone(), Array1::from_elem(80, 0.5)).unwrap();
    assert!(run_pptest(&labels, Model::Logistic, &NullSet::L0Ball { s0: 1 }, &TestConfig::default())
        .unwrap_err()
        .is_input());
}
