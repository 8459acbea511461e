#![allow(dead_code)]

use proptest::prelude::*;

use homnet::{Database, Fact, PointedDatabase, Schema, Value};

/// Directed graph on `v0..v{n-1}` with the given edges.
pub fn graph(n: usize, edges: &[(usize, usize)]) -> Database {
    let mut db = Database::new(Schema::graph());
    for i in 0..n {
        db.add_value(Value::from(format!("v{i}")));
    }
    for &(a, b) in edges {
        db.insert(Fact::new("E", &[&format!("v{}", a % n), &format!("v{}", b % n)])).unwrap();
    }
    db
}

/// Graphs with between `lo` and `hi` vertices.
pub fn graphs(lo: usize, hi: usize) -> impl Strategy<Value = Database> {
    (lo..=hi).prop_flat_map(|n| {
        proptest::collection::vec((0..n, 0..n), 0..=n * n).prop_map(move |edges| graph(n, &edges))
    })
}

pub fn pointed(lo: usize, hi: usize) -> impl Strategy<Value = PointedDatabase> {
    graphs(lo, hi).prop_flat_map(|db| {
        let n = db.num_values();
        (Just(db), 0..n).prop_map(|(db, r)| PointedDatabase::new(db, Value::from(format!("v{r}"))).unwrap())
    })
}

use homnet::logic::{parse, Block, Formula};

const HML_LEAVES: &[&str] = &[
    "(exists (y) (E x y))",
    "(exists (y) (E y x))",
    "(exists () (E x x))",
    "(exists (y) (E x y) (E y x))",
];

const EML_LEAVES: &[&str] = &[
    "(exists (y) (E x y) (!= x y))",
    "(exists (y) (E y x) (not (E x y)))",
    "(exists (y z) (E x y) (E y z) (not (E x z)))",
    "(not (exists () (E x x)))",
];

/// How an inner formula is attached below a new quantifier.
#[derive(Clone, Copy, Debug)]
pub enum Step {
    Out,
    In,
    OutDistinct,
    CountOut(u64),
}

fn nest(f: Formula, step: Step) -> Formula {
    let b = Block::new("x", &["y"]);
    let b = match step {
        Step::Out | Step::CountOut(_) => b.atom("E", &["x", "y"]),
        Step::In => b.atom("E", &["y", "x"]),
        Step::OutDistinct => b.atom("E", &["x", "y"]).neq("x", "y"),
    };
    let b = b.sub("y", f);
    match step {
        Step::CountOut(k) => Formula::Count(k, b),
        _ => Formula::exists(b),
    }
}

fn formulas(leaves: &'static [&'static str], steps: Vec<Step>) -> impl Strategy<Value = Formula> {
    let leaf = proptest::sample::select(leaves).prop_map(|s| parse(s).unwrap());
    leaf.prop_recursive(3, 12, 2, move |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::or(a, b)),
            (inner, proptest::sample::select(steps.clone())).prop_map(|(f, s)| nest(f, s)),
        ]
    })
}

pub fn hml() -> impl Strategy<Value = Formula> {
    formulas(HML_LEAVES, vec![Step::Out, Step::In])
}

pub fn ghml_minus() -> impl Strategy<Value = Formula> {
    formulas(HML_LEAVES, vec![Step::Out, Step::In, Step::CountOut(2), Step::CountOut(3)])
}

pub fn eml() -> impl Strategy<Value = Formula> {
    formulas(EML_LEAVES, vec![Step::Out, Step::In, Step::OutDistinct])
}
