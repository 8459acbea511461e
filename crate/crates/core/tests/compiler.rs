mod common;

use num_traits::{One, Zero};
use proptest::prelude::*;

use common::{eml, ghml_minus, graphs, hml};
use homnet::compiler::{compile, Target};
use homnet::dhn::Dhn;
use homnet::logic::{eval_all, Formula};
use homnet::{Database, Rational, Schema};

fn net(f: &Formula, target: Target) -> Dhn<Rational> {
    compile(f, target, &Schema::graph()).unwrap()
}

/// Every coordinate after every layer is 0 or 1.
fn pure(net: &Dhn<Rational>, db: &Database) -> bool {
    net.trace(db)
        .unwrap()
        .iter()
        .skip(1)
        .all(|l| l.embedding.values().flatten().all(|x| x.is_zero() || x.is_one()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hml_max_networks_agree_and_stay_boolean(f in hml(), db in graphs(1, 5)) {
        let n = net(&f, Target::MaxDhn);
        prop_assert!(n.is_simple());
        prop_assert!(pure(&n, &db));
        prop_assert_eq!(n.run_all(&db).unwrap(), eval_all(&f, &db).unwrap());
    }

    #[test]
    fn ghml_sum_networks_agree_and_stay_boolean(f in ghml_minus(), db in graphs(1, 5)) {
        let n = net(&f, Target::SumDhn);
        prop_assert!(pure(&n, &db));
        prop_assert_eq!(n.run_all(&db).unwrap(), eval_all(&f, &db).unwrap());
    }

    #[test]
    fn eml_dens_agree(f in eml(), db in graphs(1, 4)) {
        for target in [Target::MaxDen, Target::SumDen] {
            let n = net(&f, target);
            prop_assert!(pure(&n, &db));
            prop_assert_eq!(n.run_all(&db).unwrap(), eval_all(&f, &db).unwrap());
        }
    }

    #[test]
    fn connected_formulas_give_connected_patterns(f in ghml_minus()) {
        prop_assert!(net(&f, Target::SumDhn).is_connected());
        if f.is_hml() {
            prop_assert!(net(&f, Target::MaxDhn).is_connected());
        }
    }

    #[test]
    fn compilation_is_deterministic(f in eml()) {
        let a = net(&f, Target::SumDen).to_json();
        let b = net(&f, Target::SumDen).to_json();
        prop_assert_eq!(a, b);
    }
}
