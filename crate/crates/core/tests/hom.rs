mod common;

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use proptest::prelude::*;

use common::pointed;
use homnet::hom::{count, count_all_roots, emb_from_hom_basis, hom_from_emb_basis, partitions, quotient, Basis, Constraints, MatchMode};
use homnet::{PointedDatabase, Value};

fn n(p: &PointedDatabase, d: &PointedDatabase, mode: MatchMode) -> u64 {
    count(p, d, mode, &Constraints::none()).unwrap()
}

/// Brute-force count over all maps from pattern values to target values.
fn brute(p: &PointedDatabase, d: &PointedDatabase, mode: MatchMode) -> u64 {
    let pv: Vec<Value> = p.db.adom().iter().cloned().collect();
    let tv: Vec<Value> = d.db.adom().iter().cloned().collect();
    let mut total = 0;
    let mut code = vec![0usize; pv.len()];
    loop {
        let h: BTreeMap<&Value, &Value> = pv.iter().zip(&code).map(|(a, &i)| (a, &tv[i])).collect();
        let injective = code.iter().collect::<std::collections::BTreeSet<_>>().len() == code.len();
        let image = |f: &homnet::Fact| homnet::Fact {
            relation: f.relation.clone(),
            args: f.args.iter().map(|a| h[a].clone()).collect(),
        };
        let preserves = p.db.facts().iter().all(|f| d.db.contains(&image(f)));
        let reflects = match mode {
            MatchMode::Embedding => {
                let images: std::collections::BTreeSet<_> = p.db.facts().iter().map(image).collect();
                d.db.facts().iter().filter(|g| g.args.iter().all(|a| h.values().any(|b| *b == a))).all(|g| images.contains(g))
            }
            _ => true,
        };
        let ok = h[&p.root] == &d.root && preserves && reflects && (mode == MatchMode::Hom || injective);
        total += u64::from(ok);
        let mut i = 0;
        loop {
            if i == code.len() {
                return total;
            }
            code[i] += 1;
            if code[i] < tv.len() {
                break;
            }
            code[i] = 0;
            i += 1;
        }
    }
}

fn eval(basis: &Basis, d: &PointedDatabase, mode: MatchMode) -> BigRational {
    basis
        .iter()
        .fold(BigRational::zero(), |acc, (g, c)| acc + c * BigRational::from_integer(BigInt::from(n(g, d, mode))))
}

/// Glues two pointed databases at their roots; other values are kept apart.
fn glue(a: &PointedDatabase, b: &PointedDatabase) -> PointedDatabase {
    let rename = |p: &PointedDatabase, tag: &str| {
        let map = p
            .db
            .adom()
            .iter()
            .map(|v| (v.clone(), if *v == p.root { Value::new("root") } else { Value::from(format!("{tag}{v}")) }))
            .collect();
        p.db.rename(&map)
    };
    let db = rename(a, "a").union(&rename(b, "b")).unwrap();
    PointedDatabase::new(db, Value::new("root")).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn counts_match_brute_force(p in pointed(1, 3), d in pointed(1, 4)) {
        for mode in [MatchMode::Hom, MatchMode::Injective, MatchMode::Embedding] {
            prop_assert_eq!(n(&p, &d, mode), brute(&p, &d, mode), "{:?}", mode);
        }
    }

    #[test]
    fn mode_ordering(p in pointed(1, 3), d in pointed(1, 5)) {
        let (e, i, h) = (n(&p, &d, MatchMode::Embedding), n(&p, &d, MatchMode::Injective), n(&p, &d, MatchMode::Hom));
        prop_assert!(e <= i && i <= h);
    }

    #[test]
    fn partition_identity(p in pointed(1, 3), d in pointed(1, 5)) {
        let values: Vec<Value> = p.db.adom().iter().cloned().collect();
        let sum: u64 = partitions(&values).iter().map(|q| n(&quotient(&p, q).unwrap(), &d, MatchMode::Injective)).sum();
        prop_assert_eq!(sum, n(&p, &d, MatchMode::Hom));
    }

    #[test]
    fn gluing_at_the_root_multiplies_counts(a in pointed(1, 3), b in pointed(1, 3), d in pointed(1, 5)) {
        let g = glue(&a, &b);
        prop_assert_eq!(n(&g, &d, MatchMode::Hom), n(&a, &d, MatchMode::Hom) * n(&b, &d, MatchMode::Hom));
    }

    #[test]
    fn disjoint_union_multiplies_unrooted_counts(a in pointed(1, 3), b in pointed(1, 3), d in pointed(1, 4)) {
        use homnet::hom::count_unrooted;
        let map = |p: &PointedDatabase, tag: &str| {
            p.db.rename(&p.db.adom().iter().map(|v| (v.clone(), Value::from(format!("{tag}{v}")))).collect())
        };
        let u = map(&a, "a").union(&map(&b, "b")).unwrap();
        let c = |f: &homnet::Database| count_unrooted(f, &d.db, MatchMode::Hom, &Constraints::none()).unwrap();
        prop_assert_eq!(c(&u), c(&a.db) * c(&b.db));
    }

    #[test]
    fn lovasz_round_trip(p in pointed(1, 3), d in pointed(1, 5)) {
        let emb = BigRational::from_integer(n(&p, &d, MatchMode::Embedding).into());
        let hom = BigRational::from_integer(n(&p, &d, MatchMode::Hom).into());
        prop_assert_eq!(eval(&emb_from_hom_basis(&p).unwrap(), &d, MatchMode::Hom), emb);
        prop_assert_eq!(eval(&hom_from_emb_basis(&p).unwrap(), &d, MatchMode::Embedding), hom);
    }

    #[test]
    fn counting_is_deterministic(p in pointed(1, 3), d in pointed(1, 5)) {
        let a = count_all_roots(&p, &d.db, MatchMode::Injective, &Constraints::none()).unwrap();
        let b = count_all_roots(&p, &d.db, MatchMode::Injective, &Constraints::none()).unwrap();
        prop_assert_eq!(&a, &b);
        let at_root = a.iter().find(|(v, _)| *v == d.root).map(|(_, c)| *c).unwrap();
        prop_assert_eq!(at_root, n(&p, &d, MatchMode::Injective));
    }
}
