use proptest::prelude::*;

use homnet::datasets::{gen_local_transitivity, gen_sun, oracle_local_transitivity, oracle_sun, split, Dataset, LtParams, SunParams};
use homnet::logic::{eval, local_transitivity, phi_sun};
use homnet::PointedDatabase;

fn lt_small() -> LtParams {
    LtParams {
        n_chains: 6,
        chain_len: 8,
        delete: 40,
    }
}

fn sun_small() -> SunParams {
    SunParams {
        n_pos: 5,
        n_neg: 5,
        ..SunParams::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn lt_labels_match_oracle_and_formula(seed in any::<u64>()) {
        let ds = gen_local_transitivity(seed, &lt_small()).unwrap();
        let f = local_transitivity();
        for (v, &l) in &ds.labels {
            prop_assert_eq!(l, oracle_local_transitivity(&ds.db, v));
            prop_assert_eq!(l, eval(&f, &PointedDatabase::new(ds.db.clone(), v.clone()).unwrap()).unwrap());
        }
    }

    #[test]
    fn sun_labels_match_oracle_and_formula(seed in any::<u64>()) {
        let ds = gen_sun(seed, &sun_small()).unwrap();
        let f = phi_sun();
        for (v, &l) in &ds.labels {
            prop_assert_eq!(l, oracle_sun(&ds.db, v));
            prop_assert_eq!(l, eval(&f, &PointedDatabase::new(ds.db.clone(), v.clone()).unwrap()).unwrap());
        }
        prop_assert_eq!(ds.positives(), 6 * 5);
        prop_assert_eq!(ds.labels.len(), 6 * 10);
    }

    #[test]
    fn sun_labels_cover_part_of_the_domain(seed in any::<u64>()) {
        let ds = gen_sun(seed, &sun_small()).unwrap();
        prop_assert!(ds.labels.keys().all(|v| ds.db.has_value(v)));
        prop_assert!(ds.labels.len() < ds.db.num_values());
    }

    #[test]
    fn generation_is_seed_deterministic(seed in any::<u64>()) {
        prop_assert_eq!(gen_local_transitivity(seed, &lt_small()).unwrap(), gen_local_transitivity(seed, &lt_small()).unwrap());
        prop_assert_eq!(gen_sun(seed, &sun_small()).unwrap(), gen_sun(seed, &sun_small()).unwrap());
        let ds = gen_sun(seed, &sun_small()).unwrap();
        prop_assert_eq!(Dataset::from_json(&ds.to_json()).unwrap(), ds);
    }

    #[test]
    fn splits_partition_the_examples(n in 1usize..500, seed in any::<u64>()) {
        let s = split(n, seed, (0.6, 0.2, 0.2)).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(s.clone(), split(n, seed, (0.6, 0.2, 0.2)).unwrap());
    }
}
