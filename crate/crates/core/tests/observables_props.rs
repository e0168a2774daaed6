use horolab::lattice::Coords;
use horolab::observables::{dense_family, preset, preset_names, Bump, Observable, Profile};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn bump_strategy() -> impl Strategy<Value = Observable> {
    (
        -0.2f64..0.2,
        1.6f64..2.6,
        0.0f64..std::f64::consts::TAU,
        0.05f64..0.3,
        0.1f64..0.5,
        0.2f64..3.0,
        -2.0f64..2.0,
        0.0f64..0.8,
        any::<bool>(),
    )
        .prop_map(|(x, y, t, rx, ry, rt, a, plateau, smooth)| {
            Observable::bump(Bump {
                center: Coords::new(x, y, t),
                radii: [rx, ry, rt],
                amplitude: a,
                plateau,
                profile: if smooth {
                    Profile::Smoothstep
                } else {
                    Profile::Hat
                },
            })
            .unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn no_sampled_pair_violates_lipschitz_constant(f in bump_strategy(), seed in any::<u64>()) {
        let bx = f.support_box();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..2000 {
            let p = Coords::new(
                rng.gen_range(bx[0][0]..bx[0][1]),
                rng.gen_range(bx[1][0]..bx[1][1]),
                rng.gen_range(bx[2][0]..bx[2][1]),
            );
            let s = rng.gen_range(1e-5..0.05);
            let q = Coords::new(p.x + s * rng.gen_range(-1.0..1.0), p.y + s * rng.gen_range(-1.0..1.0), p.theta + s * rng.gen_range(-1.0..1.0));
            let d = p.distance(&q);
            let diff = (f.eval_coords(&p) - f.eval_coords(&q)).abs();
            prop_assert!(diff <= f.lip_coord * d * (1.0 + 1e-9) + 1e-15);
            prop_assert!(f.eval_coords(&p).abs() <= f.sup_norm + 1e-15);
        }
    }
}

#[test]
fn agy_constant_dominates_distorted_coordinate_constant() {
    for name in preset_names() {
        let f = preset(&name).unwrap().certify_agy(2000, 4, 8).unwrap();
        let d = f.distortion.unwrap();
        assert!(d.min > 0.0 && d.min <= d.max);
        assert!(f.lip_agy.unwrap() >= f.lip_coord * d.min, "{name}");
    }
}

/// Some finite combination of family members is uniformly within `eps/3`
/// of each preset once the level is fine enough.
#[test]
fn family_approximates_presets() {
    let family = dense_family(7).unwrap();
    let eps = 0.15;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
    let probes: Vec<Coords> = (0..20_000)
        .map(|_| {
            Coords::new(
                rng.gen_range(-0.5..0.5),
                rng.gen_range(1.0..3.0),
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    for name in ["central-hat", "central-smooth", "plateau", "mixing"] {
        let f = preset(name).unwrap();
        let mut errors = Vec::new();
        for level in [2, 4, 6] {
            let g = family.approximate(&f, level).unwrap();
            let err = probes
                .iter()
                .map(|c| (f.eval_coords(c) - g.eval_coords(c)).abs())
                .fold(0.0, f64::max);
            errors.push(err);
        }
        assert!(
            errors.windows(2).all(|w| w[1] <= w[0] + 1e-12),
            "{name}: {errors:?}"
        );
        assert!(errors[2] <= eps / 3.0, "{name}: {errors:?}");
    }
}
