use proptest::prelude::*;
use rand::SeedableRng;

use rcinar::distributions::{thin, InnovationLaw, PhiLaw};
use rcinar::engine::ModelSpec;
use rcinar::genealogy::{simulate_ledger, CohortLedger};
use rcinar::limitlab::{ks_one_sample, ks_two_sample, Continuous, Ecdf};
use rcinar::RngStream;

proptest! {
    #[test]
    fn thinning_stays_within_bounds(x in 0u64..1_000_000_000, phi in 0.0f64..=1.0, seed in any::<u64>()) {
        let mut rng = RngStream::new(seed, 0);
        let y = thin(x, phi, &mut rng);
        prop_assert!(y <= x);
        prop_assert_eq!(thin(x, 0.0, &mut rng), 0);
        prop_assert_eq!(thin(x, 1.0, &mut rng), x);
    }

    #[test]
    fn ledger_step_conserves_counts(
        counts in prop::collection::btree_map(0u64..50, 1u64..40, 0..12),
        phi in 0.0f64..1.0,
        z in 0u64..30,
        seed in any::<u64>(),
    ) {
        let mut ledger = CohortLedger::from_counts(50, counts.clone()).unwrap();
        let before = ledger.total();
        let mut rng = RngStream::new(seed, 1);
        let survivors = ledger.step(phi, z, &mut rng);
        prop_assert!(survivors <= before);
        prop_assert_eq!(ledger.total(), survivors + z);
        prop_assert!(ledger.cohorts().values().all(|&c| c > 0));
        for (k, c) in ledger.cohorts() {
            if *k < 51 {
                prop_assert!(*c <= counts[k]);
            }
        }
    }

    #[test]
    fn coalescence_law_is_exact(counts in prop::collection::btree_map(0u64..30, 1u64..1000, 1..10)) {
        let ledger = CohortLedger::from_counts(30, counts.clone()).unwrap();
        let x: u128 = counts.values().map(|&c| u128::from(c)).sum();
        match ledger.coalescence_law() {
            None => prop_assert!(x < 2),
            Some(law) => {
                let squares: u128 = counts.values().map(|&c| u128::from(c) * u128::from(c)).sum();
                prop_assert_eq!(law.denominator, x * (x - 1));
                prop_assert_eq!(law.infinity_numerator, x * x - squares);
                let total = law.pmf.values().sum::<f64>() + law.p_infinity;
                prop_assert!((total - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn ks_statistic_is_a_distance(
        a in prop::collection::vec(-50.0f64..50.0, 1..80),
        b in prop::collection::vec(-50.0f64..50.0, 1..80),
    ) {
        let (ea, eb) = (Ecdf::new(a).unwrap(), Ecdf::new(b).unwrap());
        let r = ks_two_sample(&ea, &eb);
        prop_assert!((0.0..=1.0).contains(&r.statistic));
        prop_assert_eq!(r.pass, r.statistic <= r.threshold);
        let u = ks_one_sample(&ea, &Continuous(|x: f64| ((x + 50.0) / 100.0).clamp(0.0, 1.0)));
        prop_assert!((0.0..=1.0).contains(&u.statistic));
        prop_assert_eq!(u.pass, u.statistic <= u.threshold);
    }

    #[test]
    fn maximal_age_is_bounded_by_the_last_regeneration(seed in any::<u64>(), n in 1u64..400) {
        let m = ModelSpec::new(PhiLaw::beta(2.0, 2.0).unwrap(), InnovationLaw::poisson(2.0).unwrap()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut last_regeneration = 0u64;
        let ledger = simulate_ledger(&m, n, &mut rng, |l, survivors| {
            if survivors == 0 {
                last_regeneration = l.generation();
            }
        })
        .unwrap();
        if let Some(age) = ledger.max_age() {
            prop_assert!(age <= n - last_regeneration, "age {} n {} nu {}", age, n, last_regeneration);
        }
    }
}
