use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::relational::{Database, Fact, PointedDatabase, Value};

/// A set partition of the values of a pattern.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Partition {
    pub blocks: Vec<BTreeSet<Value>>,
}

impl Partition {
    pub fn discrete(values: &BTreeSet<Value>) -> Self {
        Partition {
            blocks: values.iter().map(|v| BTreeSet::from([v.clone()])).collect(),
        }
    }

    pub fn is_discrete(&self) -> bool {
        self.blocks.iter().all(|b| b.len() == 1)
    }

    /// Name of the quotient value for a block: sorted member names joined by `+`.
    pub fn block_name(block: &BTreeSet<Value>) -> Value {
        let names: Vec<&str> = block.iter().map(Value::as_str).collect();
        Value::from(names.join("+"))
    }
}

/// All set partitions of `0..n` as restricted growth strings: entry `i` is the
/// block of element `i`, and blocks are numbered by first occurrence.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if n == 0 {
        out.push(Vec::new());
        return out;
    }
    let mut rgs = vec![0usize; n];
    loop {
        out.push(rgs.clone());
        let mut i = n - 1;
        loop {
            if i == 0 {
                return out;
            }
            let prefix_max = rgs[..i].iter().max().copied().unwrap_or(0);
            if rgs[i] <= prefix_max {
                rgs[i] += 1;
                for r in rgs.iter_mut().skip(i + 1) {
                    *r = 0;
                }
                break;
            }
            i -= 1;
        }
    }
}

/// All set partitions of `values`.
pub fn partitions(values: &[Value]) -> Vec<Partition> {
    set_partitions(values.len())
        .into_iter()
        .map(|rgs| {
            let k = rgs.iter().max().map_or(0, |m| m + 1);
            let mut blocks = vec![BTreeSet::new(); k];
            for (i, &b) in rgs.iter().enumerate() {
                blocks[b].insert(values[i].clone());
            }
            Partition { blocks }
        })
        .collect()
}

/// `F/P`: values are the blocks, and a fact holds on blocks iff it holds on
/// some choice of representatives. The root becomes its block.
pub fn quotient(f: &PointedDatabase, p: &Partition) -> Result<PointedDatabase> {
    let mut owner: BTreeMap<&Value, Value> = BTreeMap::new();
    for b in &p.blocks {
        if b.is_empty() {
            return Err(Error::Partition("empty block".into()));
        }
        let name = Partition::block_name(b);
        for v in b {
            if owner.insert(v, name.clone()).is_some() {
                return Err(Error::Partition(format!("`{v}` occurs in two blocks")));
            }
        }
    }
    let values = f.db.adom();
    if owner.len() != values.len() || !values.iter().all(|v| owner.contains_key(v)) {
        return Err(Error::Partition("blocks do not cover the values".into()));
    }
    let mut db = Database::new(f.db.schema().clone());
    for name in owner.values() {
        db.add_value(name.clone());
    }
    for fact in f.db.facts() {
        db.insert(Fact {
            relation: fact.relation.clone(),
            args: fact.args.iter().map(|a| owner[a].clone()).collect(),
        })?;
    }
    PointedDatabase::new(db, owner[&f.root].clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hom::isomorphic;

    fn vals(n: usize) -> Vec<Value> {
        (0..n).map(|i| Value::from(format!("x{i}"))).collect()
    }

    #[test]
    fn bell_numbers() {
        let bell = [1, 1, 2, 5, 15, 52, 203];
        for (n, b) in bell.iter().enumerate() {
            assert_eq!(partitions(&vals(n)).len(), *b);
        }
    }

    #[test]
    fn partitions_are_distinct_and_cover() {
        let v = vals(4);
        let ps = partitions(&v);
        let set: BTreeSet<_> = ps
            .iter()
            .map(|p| {
                let mut b = p.blocks.clone();
                b.sort();
                b
            })
            .collect();
        assert_eq!(set.len(), ps.len());
        for p in &ps {
            let all: BTreeSet<_> = p.blocks.iter().flatten().cloned().collect();
            assert_eq!(all.len(), 4);
            assert_eq!(p.blocks.iter().map(BTreeSet::len).sum::<usize>(), 4);
        }
    }

    #[test]
    fn quotient_examples() {
        let edge = PointedDatabase::new(Database::from_edges(&[("v1", "v2")]), Value::new("v1")).unwrap();
        let all = Partition {
            blocks: vec![edge.db.adom().clone()],
        };
        let q = quotient(&edge, &all).unwrap();
        assert_eq!(q.db.num_values(), 1);
        assert!(q.db.contains(&Fact::new("E", &["v1+v2", "v1+v2"])));
        assert_eq!(q.root, Value::new("v1+v2"));

        let disc = Partition::discrete(edge.db.adom());
        assert!(isomorphic(&quotient(&edge, &disc).unwrap(), &edge));

        let path = PointedDatabase::new(
            Database::from_edges(&[("v1", "v2"), ("v2", "v3")]),
            Value::new("v1"),
        )
        .unwrap();
        let p = Partition {
            blocks: vec![
                BTreeSet::from([Value::new("v1"), Value::new("v3")]),
                BTreeSet::from([Value::new("v2")]),
            ],
        };
        let q = quotient(&path, &p).unwrap();
        let expect = PointedDatabase::new(
            Database::from_edges(&[("w1", "w2"), ("w2", "w1")]),
            Value::new("w1"),
        )
        .unwrap();
        assert!(isomorphic(&q, &expect));
    }

    #[test]
    fn invalid_partitions() {
        let edge = PointedDatabase::new(Database::from_edges(&[("v1", "v2")]), Value::new("v1")).unwrap();
        let missing = Partition {
            blocks: vec![BTreeSet::from([Value::new("v1")])],
        };
        assert!(quotient(&edge, &missing).is_err());
        let twice = Partition {
            blocks: vec![
                BTreeSet::from([Value::new("v1"), Value::new("v2")]),
                BTreeSet::from([Value::new("v2")]),
            ],
        };
        assert!(quotient(&edge, &twice).is_err());
    }
}
