use freeedge::edge::EdgeMethod;
use freeedge::harness::{ks_statistic, ks_two_sample, run_tw_experiment, ExperimentConfig};
use freeedge::measure::Measure;
use proptest::prelude::*;

fn sample() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, 1..60)
}

proptest! {
    #[test]
    fn ks_is_a_distance_in_unit_interval(x in sample(), y in sample()) {
        let d = ks_two_sample(&x, &y).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(d, ks_two_sample(&y, &x).unwrap());
        prop_assert_eq!(ks_two_sample(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn ks_invariant_under_common_shift(x in sample(), y in sample(), c in -3.0f64..3.0) {
        let sx: Vec<f64> = x.iter().map(|v| v + c).collect();
        let sy: Vec<f64> = y.iter().map(|v| v + c).collect();
        let d0 = ks_two_sample(&x, &y).unwrap();
        let d1 = ks_two_sample(&sx, &sy).unwrap();
        // Rounding may merge or split ties.
        prop_assert!((d0 - d1).abs() <= 1.0 / x.len().min(y.len()) as f64);
    }

    #[test]
    fn one_sample_ks_bounds(x in sample()) {
        let logistic = |s: f64| 1.0 / (1.0 + (-s).exp());
        let d = ks_statistic(&x, logistic).unwrap();
        prop_assert!(d >= 0.5 / x.len() as f64 - 1e-15 && d <= 1.0);
    }
}

#[test]
fn experiment_edges_satisfy_edge_invariants() {
    let u = Measure::uniform(-1.0, 1.0).unwrap();
    let cfg = ExperimentConfig::new(u.clone(), u, 0.0, 60, 4, 1);
    let r = run_tw_experiment(&cfg).unwrap();
    let e = &r.edges[0];
    assert_eq!(e.method, EdgeMethod::StabilityRoot);
    assert!(e.residual <= 1e-9);
}

#[test]
fn more_samples_do_not_worsen_gue_control() {
    let d = Measure::point_mass(0.0).unwrap();
    let median_ks = |n_samples: usize| {
        let mut ks: Vec<f64> = (0..5)
            .map(|rep| {
                let cfg = ExperimentConfig::new(d.clone(), d.clone(), 1.0, 80, n_samples, 100 + rep);
                run_tw_experiment(&cfg).unwrap().ks.unwrap()
            })
            .collect();
        ks.sort_by(f64::total_cmp);
        ks[2]
    };
    let small = median_ks(500);
    let large = median_ks(2000);
    assert!(large <= small + 0.01, "{small} -> {large}");
}
