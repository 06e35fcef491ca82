//! Property tests for structural invariants.

use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fermion_rpa::bogokernel::{check_frak_k_vs_e, diagonalize, ModeSystem};
use fermion_rpa::lattice::{annulus_count_vs_area, excitation_energy, FermiBall, InteractionPotential, Momentum};
use fermion_rpa::patches::PatchDecomposition;
use fermion_rpa::rpa::rpa_mode_integral;

fn momentum(r: i64) -> impl Strategy<Value = Momentum> {
    (-r..=r, -r..=r, -r..=r).prop_map(|(x, y, z)| Momentum::new(x, y, z))
}

fn nonzero_momentum(r: i64) -> impl Strategy<Value = Momentum> {
    momentum(r).prop_filter("nonzero", |k| !k.is_zero())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ball_is_reflection_symmetric(n in 1i64..400, p in momentum(25)) {
        let ball = FermiBall::half_integer(n).unwrap();
        prop_assert_eq!(ball.contains(&p), ball.contains(&-p));
    }

    #[test]
    fn shell_pairs_reflect(n in 1i64..300, k in nonzero_momentum(3)) {
        let ball = FermiBall::half_integer(n).unwrap();
        let plus: Vec<Momentum> = ball.shell_pairs(&k);
        let mut minus: Vec<Momentum> = ball.shell_pairs(&-k).into_iter().map(|p| -p).collect();
        minus.sort();
        let mut plus_sorted = plus.clone();
        plus_sorted.sort();
        prop_assert_eq!(plus_sorted, minus);
        for p in &plus {
            prop_assert!(!ball.contains(p) && ball.contains(&(*p - k)));
        }
    }

    #[test]
    fn slices_partition_the_shell(n in 1i64..300, k in nonzero_momentum(3)) {
        let ball = FermiBall::half_integer(n).unwrap();
        let slices = ball.slice_counts(&k).unwrap();
        let total: u64 = slices.values().sum();
        prop_assert_eq!(total, ball.shell_pairs(&k).len() as u64);
        let (lo, hi) = ball.slice_window(&k);
        for s in slices.keys() {
            prop_assert!((*s as f64) >= lo && (*s as f64) <= hi);
        }
    }

    #[test]
    fn annulus_matches_brute_force(r1 in 0.0f64..6.0, dr in 0.1f64..6.0, d0 in 1u32..6) {
        let r2 = r1 + dr;
        let (c, a) = annulus_count_vs_area(r1, r2, d0).unwrap();
        let m = r2.ceil() as i64 + 1;
        let mut brute = 0u64;
        for x in -m..=m {
            for y in -m..=m {
                let q = (d0 as i64 * x * x + y * y) as f64;
                if (q > r1 * r1 || (r1 == 0.0 && q == 0.0)) && q <= r2 * r2 {
                    brute += 1;
                }
            }
        }
        prop_assert_eq!(c, brute);
        assert_relative_eq!(a, std::f64::consts::PI / (d0 as f64).sqrt() * (r2 * r2 - r1 * r1), max_relative = 1e-14);
    }

    #[test]
    fn excitations_are_positive_under_stability(
        n in 20i64..200,
        value in 0.0f64..1.0,
        hole_pick in any::<prop::sample::Index>(),
        particle in momentum(16),
    ) {
        let ball = FermiBall::half_integer(n).unwrap();
        prop_assume!(!ball.contains(&particle));
        // Largest uniform value on the unit vectors still inside λ‖V̂‖₁ < ħ²/2.
        let cap = ball.hbar().powi(2) / 2.0 / (6.0 * ball.lambda());
        let v = InteractionPotential::unit_vectors(value * cap * 0.999).unwrap();
        let holes: Vec<Momentum> = ball.iter().collect();
        let h = holes[hole_pick.index(holes.len())];
        prop_assert!(excitation_energy(&ball, &v, &h, &particle).unwrap() > 0.0);
    }

    #[test]
    fn patch_lookup_reflects(m in (1usize..=8).prop_map(|h| 2 * h), p in momentum(30)) {
        let ball = FermiBall::half_integer(600).unwrap();
        let d = PatchDecomposition::build(m, &ball, 2.0).unwrap();
        match d.patch_of(&p) {
            Some(a) => prop_assert_eq!(d.patch_of(&-p), Some(d.reflect(a))),
            None => prop_assert_eq!(d.patch_of(&-p), None),
        }
    }

    #[test]
    fn random_mode_systems_satisfy_identities(seed in any::<u64>(), half in 1usize..=12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ms = ModeSystem::random(&mut rng, half).unwrap();
        let sol = diagonalize(&ms).unwrap();
        prop_assert!(sol.residuals.cancellation < 1e-10);
        prop_assert!(sol.residuals.hyperbolic < 1e-9);
        prop_assert!(sol.residuals.orthogonality < 1e-10);
        prop_assert!(sol.residuals.kernel_symmetry < 1e-12);
        prop_assert!(check_frak_k_vs_e(&sol).spectrum_deviation < 1e-9);
        prop_assert!(sol.trace_correction <= 1e-14);
    }

    #[test]
    fn mode_integral_is_negative_and_decreasing(c in 1e-3f64..50.0, factor in 1.01f64..3.0) {
        let a = rpa_mode_integral(c).unwrap();
        let b = rpa_mode_integral(c * factor).unwrap();
        prop_assert!(a < 0.0 && b < a);
    }
}
