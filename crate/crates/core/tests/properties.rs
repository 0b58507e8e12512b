//! Randomized invariants across the public API.

use besq_core::bridge::{sample_free_bridge, uniform_grid};
use besq_core::density::{det2_q, ln_p, ln_q, ln_q_gauged};
use besq_core::glauber::{run_coupled, DiscreteBoundary, DiscreteConfig};
use besq_core::harness::stats::ks_statistic;
use besq_core::harness::ExperimentConfig;
use besq_core::specfun::{h_alpha, AlphaIndex};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn ordered_pair(lo: f64, hi: f64) -> impl Strategy<Value = (f64, f64)> {
    (lo..hi, lo..hi).prop_map(|(a, b)| if a <= b { (a, b) } else { (b, a) })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transition_density_is_tp2(
        alpha in 0.0f64..3.0,
        t in 0.1f64..4.0,
        x in ordered_pair(0.0, 8.0),
        y in ordered_pair(0.0, 8.0),
    ) {
        let ix = AlphaIndex::new(alpha).unwrap();
        let d = det2_q(&ix, t, x, y).unwrap();
        let scale = (ln_q(&ix, t, x.0, y.0) + ln_q(&ix, t, x.1, y.1)).exp();
        prop_assert!(d >= -1e-12 * scale, "det {d} at scale {scale}");
    }

    #[test]
    fn gauged_density_is_symmetric_and_matches_bessel_form(
        alpha in 0.0f64..3.0,
        t in 0.1f64..4.0,
        x in 0.01f64..8.0,
        y in 0.01f64..8.0,
    ) {
        let ix = AlphaIndex::new(alpha).unwrap();
        let (a, b) = (ln_q_gauged(&ix, t, x, y), ln_q_gauged(&ix, t, y, x));
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        let gauge = 0.5 * alpha * (x / y).ln();
        prop_assert!((a - gauge - ln_q(&ix, t, x, y)).abs() <= 1e-12 * (1.0 + a.abs()));
        let p = ln_p(&ix, t, x.sqrt(), y.sqrt());
        prop_assert!((p - (2.0f64.ln() + 0.5 * y.ln() + ln_q(&ix, t, x, y))).abs() <= 1e-12 * (1.0 + p.abs()));
    }

    #[test]
    fn h_alpha_is_positive_and_increasing(
        alpha in 0.0f64..4.0,
        z in 0.0f64..50.0,
    ) {
        let ix = AlphaIndex::new(alpha).unwrap();
        let h = h_alpha(&ix, z);
        prop_assert!(h > 0.0 && h.is_finite());
        prop_assert!(h_alpha(&ix, z + 0.5) >= h);
    }

    #[test]
    fn ks_statistic_is_a_symmetric_distance(
        a in prop::collection::vec(-5.0f64..5.0, 1..40),
        b in prop::collection::vec(-5.0f64..5.0, 1..40),
    ) {
        let d = ks_statistic(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(d, ks_statistic(&b, &a).unwrap());
        prop_assert_eq!(ks_statistic(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn config_text_round_trips(
        n in 1usize..500,
        samples in 1usize..10_000,
        seed in any::<u64>(),
        alpha in 0.0f64..5.0,
        tol in 1e-12f64..1.0,
    ) {
        let cfg = ExperimentConfig::named("onepoint")
            .with("n", n)
            .with("samples", samples)
            .with("seed", seed)
            .with("alpha", alpha)
            .with("tol.z_max", tol);
        let back = ExperimentConfig::parse(&cfg.to_text()).unwrap();
        prop_assert_eq!(back.to_text(), cfg.to_text());
        prop_assert_eq!(back.seed, seed);
        prop_assert_eq!(back.alpha, alpha);
        prop_assert_eq!(back.tolerance("z_max", 0.0).unwrap(), tol);
    }

    #[test]
    fn free_bridge_hits_endpoints_and_stays_nonnegative(
        alpha in 0.0f64..3.0,
        x in 0.0f64..5.0,
        y in 0.0f64..5.0,
        seed in any::<u64>(),
    ) {
        let ix = AlphaIndex::new(alpha).unwrap();
        let grid = uniform_grid(0.0, 1.0, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let path = sample_free_bridge(&ix, 0.0, 1.0, x, y, &grid, &mut rng).unwrap();
        prop_assert_eq!(path.len(), grid.len());
        prop_assert!((path[0] - x).abs() < 1e-12);
        prop_assert!((path[16] - y).abs() < 1e-12);
        prop_assert!(path.iter().all(|v| *v >= 0.0 && v.is_finite()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn coupled_glauber_chains_stay_ordered(
        alpha in 0.0f64..2.5,
        x in ordered_pair(0.2, 1.5),
        y in ordered_pair(0.2, 1.5),
        shift in 0.0f64..0.5,
        seed in any::<u64>(),
    ) {
        let ix = AlphaIndex::new(alpha).unwrap();
        let lo = DiscreteBoundary::free(2, vec![x.0, x.1 + 0.1], vec![y.0, y.1 + 0.1]).unwrap();
        let hi = DiscreteBoundary::free(
            2,
            vec![x.0 + shift, x.1 + 0.1 + shift],
            vec![y.0 + shift, y.1 + 0.1 + shift],
        )
        .unwrap();
        let m = 4;
        let init_lo = DiscreteConfig::lowest_admissible(&lo, m).unwrap();
        let init_hi = DiscreteConfig::lowest_admissible(&hi, m).unwrap();
        prop_assume!(init_hi.dominates(&init_lo));
        let run = run_coupled(&ix, &hi, &lo, init_hi, init_lo, 20_000, seed, 0).unwrap();
        prop_assert_eq!(run.violation_count, 0);
        prop_assert!(run.final_hi.dominates(&run.final_lo));
    }
}
