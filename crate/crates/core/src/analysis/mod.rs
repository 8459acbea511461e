//! Bounded-model emptiness and subsumption for networks.
//!
//! Candidate models are connected pointed databases of bounded degree,
//! grown one fact at a time from a lone root and deduplicated up to
//! root-preserving isomorphism.

use std::collections::{HashSet, VecDeque};

use serde_json::{json, Value as Json};

use crate::dhn::Dhn;
use crate::error::Result;
use crate::hom::{canonical_form, CanonicalForm};
use crate::relational::{Fact, PointedDatabase, Schema, Value};
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub enum Verdict {
    /// A database on which the property was found.
    Found(PointedDatabase),
    /// Nothing found among the enumerated databases. `definitive` is set when
    /// the search provably covers every database that matters.
    None { definitive: bool, explored: usize },
}

impl Verdict {
    pub fn witness(&self) -> Option<&PointedDatabase> {
        match self {
            Verdict::Found(p) => Some(p),
            Verdict::None { .. } => None,
        }
    }

    pub fn to_json(&self) -> Json {
        match self {
            Verdict::Found(p) => json!({ "result": "found", "database": p.to_json() }),
            Verdict::None { definitive, explored } => json!({
                "result": if *definitive { "empty-definitive" } else { "empty-bounded" },
                "explored": explored,
            }),
        }
    }
}

fn name(i: usize) -> Value {
    Value::from(format!("x{i}"))
}

/// Facts that can extend `db`: each touches an existing value (unless
/// nullary), introduces new values in order, and keeps within the caps.
fn extensions(p: &PointedDatabase, schema: &Schema, degree: usize, max_size: usize) -> (Vec<PointedDatabase>, bool) {
    let n = p.db.num_values();
    let mut out = Vec::new();
    let mut capped = false;
    for (rel, arity) in schema.relations() {
        let fresh = arity.min(max_size.saturating_sub(n));
        let width = n + arity;
        for mut code in 0..width.pow(arity as u32) {
            let mut args = Vec::with_capacity(arity);
            for _ in 0..arity {
                args.push(code % width);
                code /= width;
            }
            if arity > 0 && args.iter().all(|&a| a >= n) {
                continue;
            }
            // New values must be n, n+1, ... in order of first use.
            let mut next = n;
            let mut ok = true;
            for &a in &args {
                if a == next {
                    next += 1;
                } else if a > next {
                    ok = false;
                    break;
                }
            }
            if !ok {
                continue;
            }
            if next - n > fresh {
                capped = true;
                continue;
            }
            let fact = Fact {
                relation: rel.to_string(),
                args: args.iter().map(|&a| name(a)).collect(),
            };
            if p.db.contains(&fact) {
                continue;
            }
            let mut db = p.db.clone();
            db.insert(fact).expect("fact built from schema");
            if db.degree() > degree {
                continue;
            }
            out.push(PointedDatabase::new(db, p.root.clone()).expect("root kept"));
        }
    }
    (out, capped)
}

/// Breadth-first walk over connected pointed databases with at most
/// `max_size` values and degree at most `degree`, one per isomorphism class.
/// Stops early when `visit` returns `true`. Returns the number of databases
/// visited and whether the size cap cut off any extension.
fn walk(schema: &Schema, degree: usize, max_size: usize, mut visit: impl FnMut(&PointedDatabase) -> Result<bool>) -> Result<(usize, bool, bool)> {
    let start = PointedDatabase::single(schema.clone(), "x0");
    let mut seen: HashSet<CanonicalForm> = HashSet::from([canonical_form(&start)]);
    let mut queue = VecDeque::from([start]);
    let mut count = 0;
    let mut capped = false;
    while let Some(p) = queue.pop_front() {
        count += 1;
        if visit(&p)? {
            return Ok((count, capped, true));
        }
        let (next, c) = extensions(&p, schema, degree, max_size);
        capped |= c;
        for q in next {
            let cf = canonical_form(&q);
            if seen.insert(cf.clone()) {
                // Canonical names keep the value naming scheme intact.
                queue.push_back(cf.to_pointed(schema));
            }
        }
    }
    Ok((count, capped, false))
}

/// All connected pointed databases within the caps, up to isomorphism.
pub fn connected_pointed(schema: &Schema, degree: usize, max_size: usize) -> Result<Vec<PointedDatabase>> {
    let mut out = Vec::new();
    walk(schema, degree, max_size, |p| {
        out.push(p.clone());
        Ok(false)
    })?;
    Ok(out)
}

/// Union of the pattern schemas of a network.
pub fn network_schema<S: Scalar>(net: &Dhn<S>) -> Result<Schema> {
    net.queries().try_fold(Schema::new(), |acc, q| acc.union(q.pattern.db.schema()))
}

/// Model size beyond which a connected network with `layers` layers and
/// patterns of at most `pattern_size` values cannot tell databases of degree
/// `degree` apart: the number of values within distance `layers * pattern_size`
/// of the root.
pub fn size_bound(degree: usize, layers: usize, pattern_size: usize) -> Option<usize> {
    let exp = u32::try_from(layers.checked_mul(pattern_size)?.checked_add(1)?).ok()?;
    (degree.checked_add(1)?).checked_pow(exp)?.checked_sub(1)
}

fn definitive<S: Scalar>(nets: &[&Dhn<S>], degree: usize, max_size: usize, capped: bool) -> bool {
    if !nets.iter().all(|n| n.is_connected()) {
        return false;
    }
    if !capped {
        return true;
    }
    let layers = nets.iter().map(|n| n.layers.len()).max().unwrap_or(0);
    let size = nets.iter().map(|n| n.max_pattern_size()).max().unwrap_or(1);
    size_bound(degree, layers, size).is_some_and(|b| max_size >= b)
}

/// Searches for a pointed database accepted by `net`.
pub fn emptiness_bounded<S: Scalar>(net: &Dhn<S>, degree: usize, max_size: usize) -> Result<Verdict> {
    let schema = network_schema(net)?;
    let mut found = None;
    let (explored, capped, hit) = walk(&schema, degree, max_size.max(1), |p| {
        if net.run(p)?.accept {
            found = Some(p.clone());
            return Ok(true);
        }
        Ok(false)
    })?;
    Ok(match found {
        Some(p) if hit => Verdict::Found(p),
        _ => Verdict::None {
            definitive: definitive(&[net], degree, max_size, capped),
            explored,
        },
    })
}

/// Searches for a pointed database accepted by `net1` and rejected by `net2`.
pub fn subsumption_bounded<S: Scalar>(net1: &Dhn<S>, net2: &Dhn<S>, degree: usize, max_size: usize) -> Result<Verdict> {
    let schema = network_schema(net1)?.union(&network_schema(net2)?)?;
    let mut found = None;
    let (explored, capped, _) = walk(&schema, degree, max_size.max(1), |p| {
        if net1.run(p)?.accept && !net2.run(p)?.accept {
            found = Some(p.clone());
            return Ok(true);
        }
        Ok(false)
    })?;
    Ok(match found {
        Some(p) => Verdict::Found(p),
        None => Verdict::None {
            definitive: definitive(&[net1, net2], degree, max_size, capped),
            explored,
        },
    })
}
