use std::collections::BTreeSet;

use super::*;
use crate::hom::isomorphic;
use crate::logic::{eval_all, local_transitivity, phi_sun};
use crate::relational::Schema;
use crate::sample::random_database;
use rand::Rng;

#[test]
fn lt_defaults() {
    let d = gen_local_transitivity(0, &LtParams::default()).unwrap();
    assert_eq!(d.db.num_values(), 4000);
    assert_eq!(d.db.facts().len(), 34000);
    assert_eq!(d.labels.len(), 4000);
    let mut checked = 0;
    for comp in d.db.components() {
        for v in comp.adom() {
            assert_eq!(oracle_local_transitivity(&comp, v), d.labels[v]);
            checked += 1;
        }
    }
    assert_eq!(checked, 4000);
}

#[test]
fn lt_positive_band() {
    for seed in 0..20 {
        let d = gen_local_transitivity(seed, &LtParams::default()).unwrap();
        let pos = d.positives();
        assert!((1700..=2150).contains(&pos), "seed {seed}: {pos}");
    }
}

#[test]
fn lt_without_deletions_is_transitive() {
    let d = gen_local_transitivity(
        3,
        &LtParams {
            delete: 0,
            ..LtParams::default()
        },
    )
    .unwrap();
    assert_eq!(d.positives(), 4000);
    assert!(gen_local_transitivity(
        3,
        &LtParams {
            delete: 38001,
            ..LtParams::default()
        }
    )
    .is_err());
}

#[test]
fn lt_oracle_examples() {
    let t = Database::from_edges(&[("1", "2"), ("2", "3"), ("1", "3")]);
    assert!(oracle_local_transitivity(&t, &Value::new("1")));
    let p = Database::from_edges(&[("a", "b"), ("b", "c")]);
    assert!(!oracle_local_transitivity(&p, &Value::new("a")));
    let f = local_transitivity();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let n = rng.gen_range(1..=7);
        let db = random_database(&mut rng, &Schema::graph(), n, 0.35);
        for (v, b) in eval_all(&f, &db).unwrap() {
            assert_eq!(oracle_local_transitivity(&db, &v), b);
        }
    }
}

#[test]
fn sun_defaults() {
    let d = gen_sun(0, &SunParams::default()).unwrap();
    assert_eq!(d.positives(), 600);
    assert_eq!(d.labels.len(), 1200);
    assert!(d.db.num_values() > 1200);
    for f in d.db.facts() {
        assert_ne!(f.args[0], f.args[1]);
        assert!(d.db.contains(&crate::Fact::new("E", &[f.args[1].as_str(), f.args[0].as_str()])));
    }
    let mut checked = 0;
    for comp in d.db.components() {
        for v in comp.adom() {
            if let Some(&l) = d.labels.get(v) {
                assert_eq!(oracle_sun(&comp, v), l, "{v}");
                checked += 1;
            }
        }
    }
    assert_eq!(checked, 1200);
}

#[test]
fn sun_oracle_matches_formula() {
    let d = gen_sun(
        5,
        &SunParams {
            n_pos: 4,
            n_neg: 4,
            ..SunParams::default()
        },
    )
    .unwrap();
    let f = phi_sun();
    for comp in d.db.components() {
        for (v, b) in eval_all(&f, &comp).unwrap() {
            assert_eq!(oracle_sun(&comp, &v), b, "{v}");
            if let Some(&l) = d.labels.get(&v) {
                assert_eq!(l, b);
            }
        }
    }
}

#[test]
fn catalog() {
    let c = pattern_catalog_lt();
    assert_eq!(c.len(), 13);
    for (i, p) in c.iter().enumerate() {
        assert!(p.db.is_connected());
        assert!(p.db.num_values() <= 3);
        for q in &c[i + 1..] {
            assert!(!isomorphic(p, q));
        }
    }
    assert!(sun_patterns().iter().all(|p| p.db.is_connected()));
}

#[test]
fn splits() {
    let s = split(4000, 1, (0.6, 0.2, 0.2)).unwrap();
    assert_eq!((s.train.len(), s.val.len(), s.test.len()), (2400, 800, 800));
    assert_eq!(s, split(4000, 1, (0.6, 0.2, 0.2)).unwrap());
    let all: BTreeSet<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
    assert_eq!(all.len(), 4000);
    assert!(split(10, 0, (0.5, 0.5, 0.5)).is_err());
}

#[test]
fn generation_is_deterministic_and_round_trips() {
    let p = SunParams {
        n_pos: 3,
        n_neg: 3,
        ..SunParams::default()
    };
    let a = gen_sun(11, &p).unwrap();
    let b = gen_sun(11, &p).unwrap();
    assert_eq!(a.to_json().to_string(), b.to_json().to_string());
    assert_eq!(Dataset::from_json(&a.to_json()).unwrap(), a);
    assert_ne!(gen_sun(12, &p).unwrap().to_json(), a.to_json());
}
