use horolab::dynamics::{exceptional_indicator, orbit_average, LacunaryGrid};
use horolab::lattice::{sample_haar, LatticePoint};
use horolab::observables::preset;
use horolab::stats::MeanAcc;
use proptest::prelude::*;

fn base_point() -> impl Strategy<Value = LatticePoint> {
    (-0.5f64..0.5, 0.9f64..4.0, 0.0f64..std::f64::consts::TAU)
        .prop_filter("fundamental domain", |(x, y, _)| x * x + y * y > 1.0)
        .prop_map(|(x, y, t)| LatticePoint::from_coords(x, y, t).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn shifting_the_start_changes_average_by_at_most_2s_sup_over_t(
        p in base_point(), s in 0.0f64..5.0, t in prop::sample::select(vec![20.0, 80.0, 320.0]),
    ) {
        let f = preset("central-hat").unwrap();
        let step = 0.01;
        let a = orbit_average(&f, &p, t, step).unwrap();
        let b = orbit_average(&f, &p.horocycle(s), t, step).unwrap();
        let bound = 2.0 * s * f.sup_norm / t + a.quad_error_bound + b.quad_error_bound;
        prop_assert!((a.value - b.value).abs() <= bound);
    }

    #[test]
    fn exceptional_sets_nest_in_kappa(p in base_point(), k1 in 0.05f64..0.9, dk in 0.0f64..0.09, m in 10u32..40) {
        let f = preset("mixing").unwrap().shifted(0.237);
        let grid = LacunaryGrid::new(0.1, 40).unwrap();
        let a = exceptional_indicator(&f, &p, &grid, k1, m, 0.05).unwrap();
        let b = exceptional_indicator(&f, &p, &grid, k1 + dk, m, 0.05).unwrap();
        prop_assert!(!a.in_exceptional() || b.in_exceptional());
    }
}

#[test]
fn haar_average_of_orbit_average_is_the_mean() {
    let f = preset("central-smooth").unwrap();
    let mean = f.estimate_mean(200_000, 1).unwrap();
    let samples = sample_haar(2, 10_000);
    for t in [1.0, 10.0, 50.0] {
        let mut acc = MeanAcc::new();
        for s in &samples {
            acc.push(orbit_average(&f, &s.point, t, 0.02).unwrap().value);
        }
        let se = (acc.stderr().powi(2) + mean.stderr.powi(2)).sqrt();
        assert!(
            (acc.mean() - mean.value).abs() <= 3.0 * se,
            "T = {t}: {} vs {}",
            acc.mean(),
            mean.value
        );
    }
}
