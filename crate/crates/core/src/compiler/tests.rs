use super::*;
use crate::logic::{eval, eval_all, local_transitivity, parse, phi_sun, strictify, triangle_loops};
use crate::neural::Activation;
use crate::sample::random_database;
use crate::Rational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn agrees_on_random(f: &Formula, net: &Dhn<Rational>, schema: &Schema, n: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n {
        let size = rng.gen_range(1..=5);
        let p = rng.gen_range(0.1..0.6);
        let db = random_database(&mut rng, schema, size, p);
        assert_eq!(net.run_all(&db).unwrap(), eval_all(f, &db).unwrap(), "{f} on {:?}", db.facts());
    }
}

fn quick(f: &Formula, net: &Dhn<Rational>) -> EquivReport {
    let cfg = EquivConfig {
        exhaustive_values: 2,
        samples: 60,
        max_values: 5,
        ..EquivConfig::default()
    };
    check_equivalence(f, net, &cfg).unwrap()
}

#[test]
fn unary_atom_formula() {
    let f = parse("(P x)").unwrap();
    let net = compile_hml_max::<Rational>(&f).unwrap();
    agrees_on_random(&f, &net, &Schema::graph().with("P", 1), 100, 1);
    assert!(net.is_simple());
}

#[test]
fn sinks() {
    let f = parse("(not (exists (y) (E x y)))").unwrap();
    let net = compile_hml_max::<Rational>(&f).unwrap();
    agrees_on_random(&f, &net, &Schema::graph(), 100, 2);
    let db = Database::from_edges(&[("a", "b")]);
    let acc = net.run_all(&db).unwrap();
    assert!(!acc[&Value::new("a")] && acc[&Value::new("b")]);
}

#[test]
fn one_layer_per_subformula() {
    let f = parse("(or (not (exists (y) (E x y) (exists (z) (E y z)))) (exists (y) (E y x)))").unwrap();
    let nodes = subformulas(&f).unwrap();
    assert_eq!(nodes.len(), 5);
    let net = compile_hml_max::<Rational>(&f).unwrap();
    assert_eq!(net.layers.len(), 5);
    assert!(net.layers.iter().all(|l| l.output_dim() == 5));
    assert_eq!(net.input_dim(), 0);
    // Shared subformulas get a single layer.
    let g = parse("(and (exists (y) (E x y)) (not (exists (y) (E x y))))").unwrap();
    assert_eq!(subformulas(&g).unwrap().len(), 3);
}

#[test]
fn counting_blocks() {
    let f = parse("(exists>= 2 (y) (E x y))").unwrap();
    let net = compile_ghmlminus_sum::<Rational>(&f).unwrap();
    agrees_on_random(&f, &net, &Schema::graph(), 100, 3);
    assert!(net.is_simple());
    assert!(net.is_connected());
}

#[test]
fn sum_and_max_agree_on_hml() {
    let f = parse("(exists (y) (E x y) (not (exists (z) (E y z) (E z z))))").unwrap();
    let max = compile_hml_max::<Rational>(&f).unwrap();
    let sum = compile_ghmlminus_sum::<Rational>(&f).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let n = rng.gen_range(1..=5);
        let db = random_database(&mut rng, &Schema::graph(), n, 0.4);
        assert_eq!(max.run_all(&db).unwrap(), sum.run_all(&db).unwrap());
    }
    let loose = parse("(exists (y) (E x y) (exists () (P y)))").unwrap();
    assert!(compile_ghmlminus_sum::<Rational>(&loose).unwrap().is_connected());
    assert!(!compile_ghmlminus_sum::<Rational>(&parse("(exists (y) (P y))").unwrap()).unwrap().is_connected());
}

#[test]
fn fragments_are_enforced() {
    let count = parse("(exists>= 2 (y) (E x y))").unwrap();
    assert!(compile_hml_max::<Rational>(&count).is_err());
    let neq = parse("(exists (y) (E x y) (!= x y))").unwrap();
    assert!(compile_ghmlminus_sum::<Rational>(&neq).is_err());
    assert!(compile_eml_max_den::<Rational>(&neq, &Schema::graph()).is_err());
    assert!(compile_rhml_mean::<Rational>(&count).is_err());
}

#[test]
fn strict_eml_dens() {
    let schema = Schema::graph();
    let f = parse("(exists (y) (E x y) (!= x y))").unwrap();
    let s = strictify(&f, &schema).unwrap();
    for net in [compile_eml_max_den::<Rational>(&s, &schema).unwrap(), compile_eml_sum_den::<Rational>(&s, &schema).unwrap()] {
        let r = quick(&f, &net);
        assert!(r.ok(), "{:?}", r.disagreements.first());
        assert_eq!(r.impure, 0);
    }
    let neg = parse("(not (exists (y z) (E x y) (E y z) (not (E x z))))").unwrap();
    let net = compile::<Rational>(&neg, Target::SumDen, &schema).unwrap();
    assert!(quick(&neg, &net).ok());
}

#[test]
fn single_value_databases_of_graph_schema() {
    let f = strictify(&parse("(not (E x x))").unwrap(), &Schema::graph()).unwrap();
    let net = compile_eml_max_den::<Rational>(&f, &Schema::graph()).unwrap();
    let Node::Not(_) = subformulas(&f).unwrap()[1] else { panic!() };
    assert_eq!(net.layers[1].queries.len(), 2);
}

#[test]
fn sun_den_on_samples() {
    let schema = Schema::graph();
    let s = strictify(&phi_sun(), &schema).unwrap();
    let net = compile_eml_sum_den::<Rational>(&s, &schema).unwrap();
    let mut pos = Database::new(schema.clone());
    for i in 0..6 {
        for (a, b) in [(format!("c{i}"), format!("c{}", (i + 1) % 6)), (format!("c{i}"), format!("p{i}"))] {
            pos.insert(Fact::new("E", &[&a, &b])).unwrap();
            pos.insert(Fact::new("E", &[&b, &a])).unwrap();
        }
    }
    let mut neg = pos.clone();
    for a in ["p0", "q"] {
        neg.insert(Fact::new("E", &[a, if a == "q" { "p0" } else { "q" }])).unwrap();
    }
    let c0 = Value::new("c0");
    assert!(net.run(&PointedDatabase::new(pos, c0.clone()).unwrap()).unwrap().accept);
    assert!(!net.run(&PointedDatabase::new(neg, c0).unwrap()).unwrap().accept);
}

#[test]
fn ratio_formulas() {
    let f = triangle_loops();
    let net = compile_rhml_mean::<Rational>(&f).unwrap();
    let looped = PointedDatabase::new(
        Database::from_edges(&[("a", "b"), ("b", "c"), ("c", "a"), ("a", "a"), ("b", "b"), ("c", "c")]),
        Value::new("a"),
    )
    .unwrap();
    assert!(net.run(&looped).unwrap().accept);
    assert!(eval(&f, &looped).unwrap());
    let ge = compile_rhml_mean::<Rational>(&parse("(ratio>= 1/2 (y) (mu (P y)) (nu (E x y)))").unwrap()).unwrap();
    let gt = compile_rhml_mean::<Rational>(&parse("(ratio> 1/2 (y) (mu (P y)) (nu (E x y)))").unwrap()).unwrap();
    let lonely = PointedDatabase::single(Schema::graph().with("P", 1), "a");
    assert!(ge.run(&lonely).unwrap().accept);
    assert!(!gt.run(&lonely).unwrap().accept);
    let r = quick(&f, &net);
    assert!(r.ok());
    assert_eq!(r.impure, 0);
}

#[test]
fn mutation_is_detected() {
    let f = parse("(exists (y) (E x y) (not (exists (z) (E y z))))").unwrap();
    let mut net = compile_hml_max::<Rational>(&f).unwrap();
    assert!(quick(&f, &net).ok());
    let Combine::Fnn(c) = &mut net.layers.last_mut().unwrap().combine else { panic!() };
    let last = c.layers[0].outputs - 1;
    c.layers[0].set_w(0, last, Rational::from_integer(0.into()));
    assert!(!quick(&f, &net).ok());
}

#[test]
fn compilation_is_deterministic() {
    let f = parse("(or (exists (y) (E x y) (not (exists () (E y y)))) (exists (y z) (E y x) (E z y)))").unwrap();
    let a = compile_hml_max::<Rational>(&f).unwrap().to_json().to_string();
    let b = compile_hml_max::<Rational>(&f).unwrap().to_json().to_string();
    assert_eq!(a, b);
}

#[test]
fn hand_built_local_transitivity() {
    let net = local_transitivity_network::<Rational>().unwrap();
    assert!(net.is_simple());
    assert!(net.layers[0].queries.iter().all(|q| q.agg == Aggregation::Sum));
    let f = local_transitivity();
    agrees_on_random(&f, &net, &Schema::graph(), 100, 5);
}

#[test]
fn transforms_use_truncated_relu() {
    let net = compile_ghmlminus_sum::<Rational>(&parse("(exists>= 3 (y) (E y x))").unwrap()).unwrap();
    for q in net.queries() {
        for t in q.transforms.values() {
            assert!(t.factors[0].layers.iter().all(|l| l.activation == Activation::ReluStar));
        }
    }
}
