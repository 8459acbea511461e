use std::collections::BTreeMap;

use crate::relational::{Database, Fact, PointedDatabase, Schema, Value};

/// Isomorphism-invariant encoding of a (pointed) database: the lexicographically
/// least fact list over all relabelings of the values to `0..n`. When rooted,
/// the root is always `0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalForm {
    pub n: usize,
    pub facts: Vec<(String, Vec<u16>)>,
}

impl CanonicalForm {
    /// Materializes the form with values `x0..x{n-1}`; the root (if any) is `x0`.
    pub fn to_database(&self, schema: &Schema) -> Database {
        let name = |i: u16| Value::from(format!("x{i}"));
        let mut db = Database::new(schema.clone());
        for i in 0..self.n {
            db.add_value(name(i as u16));
        }
        for (r, args) in &self.facts {
            db.insert(Fact {
                relation: r.clone(),
                args: args.iter().map(|&a| name(a)).collect(),
            })
            .expect("canonical facts come from the schema");
        }
        db
    }

    pub fn to_pointed(&self, schema: &Schema) -> PointedDatabase {
        PointedDatabase::new(self.to_database(schema), Value::new("x0")).expect("root exists")
    }
}

fn invariant(db: &Database, v: &Value) -> Vec<(String, usize, usize)> {
    let mut tally: BTreeMap<(String, usize), usize> = BTreeMap::new();
    for f in db.facts() {
        for (p, a) in f.args.iter().enumerate() {
            if a == v {
                *tally.entry((f.relation.clone(), p)).or_default() += 1;
            }
        }
    }
    tally.into_iter().map(|((r, p), c)| (r, p, c)).collect()
}

fn canonical(db: &Database, root: Option<&Value>) -> CanonicalForm {
    // Values are grouped by an invariant; labels are assigned class by class and
    // only permutations inside a class are tried.
    let mut classes: BTreeMap<(bool, Vec<(String, usize, usize)>), Vec<Value>> = BTreeMap::new();
    for v in db.adom() {
        let is_root = root == Some(v);
        classes
            .entry((!is_root, invariant(db, v)))
            .or_default()
            .push(v.clone());
    }
    let classes: Vec<Vec<Value>> = classes.into_values().collect();
    let facts: Vec<&Fact> = db.facts().iter().collect();
    let mut best: Option<Vec<(String, Vec<u16>)>> = None;
    let mut label: BTreeMap<Value, u16> = BTreeMap::new();

    fn encode(facts: &[&Fact], label: &BTreeMap<Value, u16>) -> Vec<(String, Vec<u16>)> {
        let mut out: Vec<(String, Vec<u16>)> = facts
            .iter()
            .map(|f| (f.relation.clone(), f.args.iter().map(|a| label[a]).collect()))
            .collect();
        out.sort();
        out
    }

    fn perms(
        classes: &[Vec<Value>],
        next: u16,
        label: &mut BTreeMap<Value, u16>,
        facts: &[&Fact],
        best: &mut Option<Vec<(String, Vec<u16>)>>,
    ) {
        let Some((first, rest)) = classes.split_first() else {
            let enc = encode(facts, label);
            if best.as_ref().is_none_or(|b| enc < *b) {
                *best = Some(enc);
            }
            return;
        };
        let mut items = first.clone();
        permute(&mut items, 0, &mut |order: &[Value]| {
            for (i, v) in order.iter().enumerate() {
                label.insert(v.clone(), next + i as u16);
            }
            perms(rest, next + order.len() as u16, label, facts, best);
        });
    }

    fn permute(items: &mut Vec<Value>, k: usize, f: &mut dyn FnMut(&[Value])) {
        if k == items.len() {
            f(items);
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            permute(items, k + 1, f);
            items.swap(k, i);
        }
    }

    perms(&classes, 0, &mut label, &facts, &mut best);
    CanonicalForm {
        n: db.num_values(),
        facts: best.unwrap_or_default(),
    }
}

pub fn canonical_form(p: &PointedDatabase) -> CanonicalForm {
    canonical(&p.db, Some(&p.root))
}

pub fn canonical_unrooted(db: &Database) -> CanonicalForm {
    canonical(db, None)
}

/// Root-preserving isomorphism test.
pub fn isomorphic(a: &PointedDatabase, b: &PointedDatabase) -> bool {
    a.db.num_values() == b.db.num_values()
        && a.db.facts().len() == b.db.facts().len()
        && canonical_form(a) == canonical_form(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pdb(edges: &[(&str, &str)], root: &str) -> PointedDatabase {
        PointedDatabase::new(Database::from_edges(edges), Value::new(root)).unwrap()
    }

    #[test]
    fn relabeling_is_invisible() {
        let a = pdb(&[("a", "b"), ("b", "c"), ("a", "c")], "a");
        let b = pdb(&[("z", "y"), ("y", "x"), ("z", "x")], "z");
        assert!(isomorphic(&a, &b));
        let c = pdb(&[("z", "y"), ("y", "x"), ("z", "x")], "y");
        assert!(!isomorphic(&a, &c));
    }

    #[test]
    fn root_matters_but_not_for_unrooted() {
        let a = pdb(&[("a", "b")], "a");
        let b = pdb(&[("a", "b")], "b");
        assert!(!isomorphic(&a, &b));
        assert_eq!(canonical_unrooted(&a.db), canonical_unrooted(&b.db));
    }

    #[test]
    fn round_trip_through_form() {
        let a = pdb(&[("a", "b"), ("b", "b"), ("c", "a")], "b");
        let f = canonical_form(&a);
        let back = f.to_pointed(&Schema::graph());
        assert!(isomorphic(&a, &back));
        assert_eq!(canonical_form(&back), f);
    }

    #[test]
    fn isolated_values_count() {
        let a = PointedDatabase::single(Schema::graph(), "r");
        let b = PointedDatabase::new(Database::new(Schema::graph()).with_value("s"), Value::new("r")).unwrap();
        assert!(!isomorphic(&a, &b));
    }
}
