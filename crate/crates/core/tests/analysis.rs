mod common;

use std::collections::HashSet;

use proptest::prelude::*;

use common::{ghml_minus, hml};
use homnet::analysis::{connected_pointed, emptiness_bounded, subsumption_bounded, Verdict};
use homnet::compiler::{compile, Target};
use homnet::hom::canonical_form;
use homnet::logic::{eval, Formula};
use homnet::sample::all_pointed;
use homnet::{Rational, Schema};

fn degree_ok(p: &homnet::PointedDatabase, b: usize) -> bool {
    p.db.degree() <= b
}

#[test]
fn enumeration_matches_brute_force_at_three_values() {
    let schema = Schema::graph();
    for b in 1..=4 {
        let mut brute = HashSet::new();
        for p in all_pointed(&schema, 3, usize::MAX).unwrap() {
            if p.db.is_connected() && degree_ok(&p, b) {
                brute.insert(canonical_form(&p));
            }
        }
        let walked: Vec<_> = connected_pointed(&schema, b, 3).unwrap();
        let forms: HashSet<_> = walked.iter().map(canonical_form).collect();
        assert_eq!(forms.len(), walked.len(), "duplicates at degree {b}");
        assert_eq!(forms, brute, "degree {b}");
    }
}

fn check_witness(f: &Formula, target: Target) -> Result<(), TestCaseError> {
    let net = compile::<Rational>(f, target, &Schema::graph()).unwrap();
    let verdict = emptiness_bounded(&net, 2, 4).unwrap();
    let small = connected_pointed(&Schema::graph(), 2, 4).unwrap();
    let satisfiable = small.iter().any(|p| eval(f, p).unwrap());
    match verdict {
        Verdict::Found(w) => {
            prop_assert!(net.run(&w).unwrap().accept);
            prop_assert!(eval(f, &w).unwrap());
            prop_assert!(w.db.is_connected() && w.db.degree() <= 2 && w.db.num_values() <= 4);
        }
        Verdict::None { .. } => prop_assert!(!satisfiable),
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hml_witnesses_verify(f in hml()) {
        check_witness(&f, Target::MaxDhn)?;
    }

    #[test]
    fn ghml_witnesses_verify(f in ghml_minus()) {
        check_witness(&f, Target::SumDhn)?;
    }

    #[test]
    fn counterexamples_separate(f in hml(), g in hml()) {
        let a = compile::<Rational>(&f, Target::MaxDhn, &Schema::graph()).unwrap();
        let b = compile::<Rational>(&g, Target::MaxDhn, &Schema::graph()).unwrap();
        match subsumption_bounded(&a, &b, 2, 3).unwrap() {
            Verdict::Found(w) => {
                prop_assert!(eval(&f, &w).unwrap() && !eval(&g, &w).unwrap());
            }
            Verdict::None { .. } => {
                for p in connected_pointed(&Schema::graph(), 2, 3).unwrap() {
                    prop_assert!(!eval(&f, &p).unwrap() || eval(&g, &p).unwrap());
                }
            }
        }
    }
}
