//! Random and exhaustive database generators used for testing and checking.

use rand::Rng;

use crate::relational::{Database, Fact, PointedDatabase, Schema, Value};

pub fn value_names(n: usize) -> Vec<Value> {
    (0..n).map(|i| Value::from(format!("v{i}"))).collect()
}

/// Every fact over `values` that the schema allows, in a fixed order.
pub fn all_facts(schema: &Schema, values: &[Value]) -> Vec<Fact> {
    let mut out = Vec::new();
    for (rel, arity) in schema.relations() {
        let n = values.len();
        if n == 0 && arity > 0 {
            continue;
        }
        let total = n.pow(arity as u32);
        for mut code in 0..total {
            let mut args = Vec::with_capacity(arity);
            for _ in 0..arity {
                args.push(values[code % n].clone());
                code /= n;
            }
            args.reverse();
            out.push(Fact {
                relation: rel.to_string(),
                args,
            });
        }
    }
    out
}

/// Database on values `v0..v{n-1}`; each possible fact is kept with probability `p`.
pub fn random_database<R: Rng + ?Sized>(rng: &mut R, schema: &Schema, n: usize, p: f64) -> Database {
    let values = value_names(n);
    let mut db = Database::new(schema.clone());
    for v in &values {
        db.add_value(v.clone());
    }
    for f in all_facts(schema, &values) {
        if rng.gen_bool(p) {
            db.insert(f).expect("fact built from schema");
        }
    }
    db
}

/// Random pointed database with 1..=max_values values and a random density.
pub fn random_pointed<R: Rng + ?Sized>(rng: &mut R, schema: &Schema, max_values: usize) -> PointedDatabase {
    let n = rng.gen_range(1..=max_values.max(1));
    let p = rng.gen_range(0.1..0.6);
    let db = random_database(rng, schema, n, p);
    let root = Value::from(format!("v{}", rng.gen_range(0..n)));
    PointedDatabase::new(db, root).expect("root is a value")
}

/// All databases on exactly the values `v0..v{n-1}` (every subset of the
/// possible facts). Returns `None` when there would be more than `limit`.
pub fn all_databases(schema: &Schema, n: usize, limit: usize) -> Option<Vec<Database>> {
    let values = value_names(n);
    let facts = all_facts(schema, &values);
    if facts.len() >= usize::BITS as usize - 1 || (1usize << facts.len()) > limit {
        return None;
    }
    let mut out = Vec::with_capacity(1 << facts.len());
    for mask in 0usize..(1 << facts.len()) {
        let mut db = Database::new(schema.clone());
        for v in &values {
            db.add_value(v.clone());
        }
        for (i, f) in facts.iter().enumerate() {
            if mask >> i & 1 == 1 {
                db.insert(f.clone()).expect("fact built from schema");
            }
        }
        out.push(db);
    }
    Some(out)
}

/// All pointed databases with between 1 and `max_values` values, each database
/// rooted at every value.
pub fn all_pointed(schema: &Schema, max_values: usize, limit: usize) -> Option<Vec<PointedDatabase>> {
    let mut out = Vec::new();
    for n in 1..=max_values {
        for db in all_databases(schema, n, limit)? {
            for v in db.adom().clone() {
                out.push(PointedDatabase::new(db.clone(), v).expect("root is a value"));
            }
        }
        if out.len() > limit {
            return None;
        }
    }
    Some(out)
}
