use super::*;
use crate::hom::{count, Constraints, MatchMode};
use crate::relational::{Database, PointedDatabase, Schema, Value};
use crate::sample::{all_databases, random_database};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pdb(edges: &[(&str, &str)], root: &str) -> PointedDatabase {
    PointedDatabase::new(Database::from_edges(edges), Value::new(root)).unwrap()
}

fn undirected(edges: &[(String, String)]) -> Database {
    let mut db = Database::new(Schema::graph());
    for (a, b) in edges {
        db.insert(crate::Fact::new("E", &[a.as_str(), b.as_str()])).unwrap();
        db.insert(crate::Fact::new("E", &[b.as_str(), a.as_str()])).unwrap();
    }
    db
}

fn sun(pendants: bool) -> Database {
    let mut edges = Vec::new();
    for i in 0..6 {
        edges.push((format!("c{i}"), format!("c{}", (i + 1) % 6)));
        if pendants {
            edges.push((format!("c{i}"), format!("p{i}")));
        }
    }
    undirected(&edges)
}

fn same_everywhere(a: &Formula, b: &Formula, db: &Database) -> bool {
    eval_all(a, db).unwrap() == eval_all(b, db).unwrap()
}

#[test]
fn parse_and_print_round_trip() {
    for src in [
        "(exists (y) (and (E x y) (not (exists (z) (E y z)))))",
        "(exists>= 2 (y) (E x y))",
        "(ghml ((y 2) (z 1)) (and (E x y) (E y z)) (and (E y x)))",
        "(exists (y) (E x y) (not (E y x)) (!= x y) (any (E y y)))",
        "(ratio>= 1/2 (y z) (mu (E x x) (E y y)) (nu (E x y) (E y z)))",
        "(or (P x) (not (Q x)))",
        "true",
    ] {
        let f = parse(src).unwrap();
        let printed = f.to_string();
        assert_eq!(parse(&printed).unwrap(), f, "{src}");
    }
    for (name, f) in builtin_formulas() {
        assert_eq!(parse(&f.to_string()).unwrap(), f, "{name}");
    }
}

#[test]
fn parser_infers_free_variables() {
    let f = parse("(exists (y) (and (E x y) (not (exists (z) (E y z)))))").unwrap();
    assert_eq!(f.free_var(), "x");
    let Formula::Exists(b) = &f else { panic!() };
    assert_eq!(b.subs[0].0, "y");
    assert_eq!(parse("(P u)").unwrap().free_var(), "u");
    assert!(parse("(exists (y) (E z y) (E x y))").is_err());
    assert!(parse("(exists (y) (E x y)").is_err());
    assert!(parse("(frob)").is_ok());
}

#[test]
fn sinks() {
    let f = parse("(not (exists (y) (E x y)))").unwrap();
    let db = Database::from_edges(&[("a", "b"), ("b", "c"), ("c", "c")]);
    let all = eval_all(&f, &db).unwrap();
    assert!(!all[&Value::new("a")]);
    assert!(!all[&Value::new("c")]);
    let db = Database::from_edges(&[("a", "b")]);
    assert!(eval_all(&f, &db).unwrap()[&Value::new("b")]);
}

#[test]
fn local_transitivity_examples() {
    let lt = local_transitivity();
    let tt = pdb(&[("1", "2"), ("2", "3"), ("1", "3")], "1");
    assert!(eval(&lt, &tt).unwrap());
    let path = pdb(&[("a", "b"), ("b", "c")], "a");
    assert!(!eval(&lt, &path).unwrap());
    // The count encoding used by the hand-built network: paths equal chorded triangles.
    let p = pdb(&[("v1", "v2"), ("v2", "v3")], "v1");
    let t = pdb(&[("v1", "v2"), ("v2", "v3"), ("v1", "v3")], "v1");
    let c = |f: &PointedDatabase, d: &PointedDatabase| count(f, d, MatchMode::Hom, &Constraints::none()).unwrap();
    assert_eq!(c(&p, &tt), 1);
    assert_eq!(c(&t, &tt), 1);
    assert_ne!(c(&p, &path), c(&t, &path));
}

#[test]
fn sun_examples() {
    let f = phi_sun();
    let pos = sun(true);
    let all = eval_all(&f, &pos).unwrap();
    for i in 0..6 {
        assert!(all[&Value::from(format!("c{i}"))]);
        assert!(!all[&Value::from(format!("p{i}"))]);
    }
    let bare = sun(false);
    assert!(eval_all(&f, &bare).unwrap().values().all(|b| !b));
    assert!(f.classify().connected);
}

#[test]
fn ratio_denominator_rule() {
    let ge = parse("(ratio>= 1/2 (y) (mu (P y)) (nu (E x y)))").unwrap();
    let gt = parse("(ratio> 1/2 (y) (mu (P y)) (nu (E x y)))").unwrap();
    let lonely = PointedDatabase::single(Schema::graph().with("P", 1), "a");
    assert!(eval(&ge, &lonely).unwrap());
    assert!(!eval(&gt, &lonely).unwrap());
    let mut db = Database::from_edges(&[("a", "b"), ("a", "c")]).with_schema(&Schema::graph().with("P", 1)).unwrap();
    db.insert(crate::Fact::new("P", &["b"])).unwrap();
    let half = PointedDatabase::new(db, Value::new("a")).unwrap();
    assert!(eval(&ge, &half).unwrap());
    assert!(!eval(&gt, &half).unwrap());
}

#[test]
fn triangle_ratio_example() {
    let f = triangle_loops();
    let looped = pdb(&[("a", "b"), ("b", "c"), ("c", "a"), ("a", "a"), ("b", "b"), ("c", "c")], "a");
    assert!(eval(&f, &looped).unwrap());
    let bare = pdb(&[("a", "b"), ("b", "c"), ("c", "a")], "a");
    assert!(!eval(&f, &bare).unwrap());
}

#[test]
fn semantic_laws_on_random_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let phi = parse("(exists (y) (E x y) (not (exists () (E y y))))").unwrap();
    let once = parse("(exists>= 1 (y) (E x y) (not (exists () (E y y))))").unwrap();
    let ratio0 = parse("(ratio> 0 (y) (mu (not (exists () (E y y)))) (nu (E x y)))").unwrap();
    let graded = parse("(ghml ((y 2)) (and (E x y)))").unwrap();
    let count2 = parse("(exists>= 2 (y) (E x y))").unwrap();
    for _ in 0..100 {
        let n = rng.gen_range(1..=5);
        let db = random_database(&mut rng, &Schema::graph(), n, 0.4);
        assert!(same_everywhere(&Formula::not(Formula::not(phi.clone())), &phi, &db));
        assert!(same_everywhere(&once, &phi, &db));
        assert!(same_everywhere(&ratio0, &phi, &db));
        assert!(same_everywhere(&graded, &count2, &db));
    }
}

#[test]
fn strict_form_of_single_edge() {
    let f = parse("(exists (y) (E x y))").unwrap();
    let s = strictify(&f, &Schema::graph()).unwrap();
    assert!(is_strict(&s, &Schema::graph()));
    assert!(!is_strict(&f, &Schema::graph()));
    let full = expand_any(&s);
    let mut blocks = 0;
    let mut stack = vec![&full];
    while let Some(g) = stack.pop() {
        match g {
            Formula::Or(a, b) => {
                stack.push(a);
                stack.push(b);
            }
            Formula::Exists(b) => {
                assert!(b.any.is_empty());
                blocks += 1;
            }
            _ => panic!("unexpected node"),
        }
    }
    assert_eq!(blocks, 9);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let n = rng.gen_range(1..=5);
        let db = random_database(&mut rng, &Schema::graph(), n, 0.35);
        assert!(same_everywhere(&f, &s, &db));
        assert!(same_everywhere(&f, &full, &db));
    }
}

#[test]
fn strictify_small_graphs_exhaustively() {
    let schema = Schema::graph();
    let formulas = [
        "(exists (y) (E x y) (!= x y))",
        "(exists (y z) (E x y) (E y z) (not (E x z)))",
        "(not (exists (y) (E y x) (not (exists (z) (E y z) (!= z y)))))",
        "(or (E x x) (exists (y) (E y y) (not (E x y))))",
    ];
    for src in formulas {
        let f = parse(src).unwrap();
        let s = strictify(&f, &schema).unwrap();
        assert!(is_strict(&s, &schema), "{src}");
        for n in 1..=3 {
            for db in all_databases(&schema, n, 1 << 10).unwrap() {
                assert!(same_everywhere(&f, &s, &db), "{src} on {:?}", db.facts());
            }
        }
    }
}

#[test]
fn classification() {
    let e = parse("(exists (y) (E x y))").unwrap();
    assert_eq!(e.classify().depth, 1);
    assert!(e.classify().connected);
    let loose = parse("(exists (y) true)").unwrap();
    assert!(!loose.classify().connected);
    let nested = parse("(exists (y) (E x y) (exists>= 3 (z) (E y z)))").unwrap();
    let c = nested.classify();
    assert_eq!((c.depth, c.width, c.counting_bound), (2, 2, 3));
    assert_eq!(e.fragment(), Some(Fragment::Hml));
    assert_eq!(nested.fragment(), Some(Fragment::GhmlMinus));
    assert_eq!(phi_sun().fragment(), Some(Fragment::Eml));
    assert_eq!(triangle_loops().fragment(), Some(Fragment::Rhml));
}

#[test]
fn catalog_evaluates() {
    let cat = builtin_formulas();
    assert!(cat.len() >= 3);
    let db = Database::from_edges(&[("a", "b"), ("b", "c"), ("c", "a")]);
    for (_, f) in &cat {
        eval_all(f, &db).unwrap();
    }
}

#[test]
fn free_variable_renaming_avoids_capture() {
    let f = parse("(exists (y) (E x y) (not (E y x)))").unwrap();
    let g = f.with_free("y");
    assert_eq!(g.free_var(), "y");
    let db = Database::from_edges(&[("a", "b"), ("b", "a"), ("b", "c")]);
    assert_eq!(eval_all(&f, &db).unwrap(), eval_all(&g, &db).unwrap());
}
