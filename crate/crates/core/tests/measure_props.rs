use freeedge::measure::Measure;
use freeedge::Complex64;
use proptest::prelude::*;

fn any_measure() -> impl Strategy<Value = Measure> {
    prop_oneof![
        (0.1f64..4.0, -2.0f64..2.0).prop_map(|(v, c)| Measure::semicircle(v, c).unwrap()),
        (-3.0f64..0.0, 0.1f64..3.0).prop_map(|(a, w)| Measure::uniform(a, a + w).unwrap()),
        (-3.0f64..0.0, 0.1f64..3.0).prop_map(|(a, w)| Measure::arcsine(a, a + w).unwrap()),
        (-2.0f64..2.0).prop_map(|c| Measure::point_mass(c).unwrap()),
        prop::collection::vec(-2.0f64..2.0, 1..20).prop_map(|x| Measure::equal_atoms(&x).unwrap()),
        prop::collection::vec(0.0f64..1.0, 3..12).prop_map(|v| {
            let mut v = v;
            v[0] = 0.0;
            *v.last_mut().unwrap() = 0.0;
            v[1] += 0.1;
            let nodes: Vec<f64> = (0..v.len()).map(|k| -1.0 + 2.0 * k as f64 / (v.len() - 1) as f64).collect();
            Measure::grid(&nodes, &v).unwrap()
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn stieltjes_maps_upper_half_plane_into_itself(mu in any_measure(), re in -5.0f64..5.0, im in 1e-3f64..5.0) {
        let m = mu.stieltjes(Complex64::new(re, im)).unwrap();
        prop_assert!(m.im > 0.0, "{m}");
    }

    #[test]
    fn stieltjes_decays_like_minus_inverse_z(mu in any_measure()) {
        let z = Complex64::new(0.0, 1e4);
        let m = mu.stieltjes(z).unwrap();
        prop_assert!((z * m + 1.0).norm() < 1e-3);
    }

    #[test]
    fn first_derivative_matches_central_difference(mu in any_measure(), re in -4.0f64..4.0, im in 0.1f64..3.0) {
        let z = Complex64::new(re, im);
        let h = 1e-5;
        let fd = (mu.stieltjes(z + h).unwrap() - mu.stieltjes(z - h).unwrap()) / (2.0 * h);
        let d = mu.stieltjes_derivative(z, 1).unwrap();
        prop_assert!((fd - d).norm() <= 1e-6 * d.norm().max(1e-300), "{fd} vs {d}");
    }
}

#[test]
fn quantile_atomization_converges_at_rate_one_over_n() {
    for mu in [
        Measure::semicircle(1.0, 0.0).unwrap(),
        Measure::uniform(-1.0, 1.0).unwrap(),
        Measure::arcsine(-2.0, 2.0).unwrap(),
    ] {
        let d100 = mu.levy_distance(&mu.quantile_atoms(100).unwrap());
        let d1000 = mu.levy_distance(&mu.quantile_atoms(1000).unwrap());
        assert!(d100 <= 1.0 / 100.0 && d1000 <= 1.0 / 1000.0, "{d100} {d1000}");
        let ratio = d100 / d1000;
        assert!((7.0..=13.0).contains(&ratio), "{} ratio {ratio}", mu.describe());
    }
}
