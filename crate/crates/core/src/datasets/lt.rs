use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Dataset, GENERATOR_VERSION};
use crate::error::{Error, Result};
use crate::relational::{Database, Fact, PointedDatabase, Schema, Value};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LtParams {
    pub n_chains: usize,
    pub chain_len: usize,
    pub delete: usize,
}

impl Default for LtParams {
    fn default() -> Self {
        LtParams {
            n_chains: 200,
            chain_len: 20,
            delete: 4000,
        }
    }
}

fn out_neighbors(db: &Database) -> BTreeMap<&Value, BTreeSet<&Value>> {
    let mut out: BTreeMap<&Value, BTreeSet<&Value>> = BTreeMap::new();
    for f in db.facts() {
        if f.relation == "E" {
            out.entry(&f.args[0]).or_default().insert(&f.args[1]);
        }
    }
    out
}

fn locally_transitive(out: &BTreeMap<&Value, BTreeSet<&Value>>, v: &Value) -> bool {
    let empty = BTreeSet::new();
    let n = out.get(v).unwrap_or(&empty);
    n.iter().all(|u1| out.get(u1).unwrap_or(&empty).iter().all(|u2| n.contains(u2)))
}

/// Whether `E(v,u₁) ∧ E(u₁,u₂)` implies `E(v,u₂)` for all `u₁, u₂`.
pub fn oracle_local_transitivity(db: &Database, v: &Value) -> bool {
    locally_transitive(&out_neighbors(db), v)
}

/// Disjoint transitive linear orders with `delete` edges removed uniformly
/// at random. Every vertex is an example.
pub fn gen_local_transitivity(seed: u64, params: &LtParams) -> Result<Dataset> {
    let LtParams { n_chains, chain_len, delete } = *params;
    let mut edges = Vec::new();
    let mut db = Database::new(Schema::graph());
    let name = |c: usize, i: usize| format!("l{c}_{i}");
    for c in 0..n_chains {
        for i in 0..chain_len {
            db.add_value(Value::from(name(c, i)));
            for j in i + 1..chain_len {
                edges.push((name(c, i), name(c, j)));
            }
        }
    }
    if delete > edges.len() {
        return Err(Error::Config(format!("cannot delete {delete} of {} edges", edges.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gone: BTreeSet<usize> = rand::seq::index::sample(&mut rng, edges.len(), delete).into_iter().collect();
    for (i, (a, b)) in edges.iter().enumerate() {
        if !gone.contains(&i) {
            db.insert(Fact::new("E", &[a, b]))?;
        }
    }
    let out = out_neighbors(&db);
    let labels = db.adom().iter().map(|v| (v.clone(), locally_transitive(&out, v))).collect();
    Ok(Dataset {
        labels,
        meta: json!({
            "generator": "local-transitivity",
            "version": GENERATOR_VERSION,
            "seed": seed,
            "params": params,
            "rng": "chacha8",
        }),
        db,
    })
}

fn rooted(edges: &[(&str, &str)]) -> PointedDatabase {
    PointedDatabase::new(Database::from_edges(edges), Value::new("r")).expect("root occurs in an edge")
}

/// The 13 connected rooted directed patterns on at most three vertices used
/// for the local transitivity experiment: both single edges, every rooting
/// of the 2-edge path, out-fork and in-fork, the three rootings of the
/// transitive triangle and the directed triangle.
pub fn pattern_catalog_lt() -> Vec<PointedDatabase> {
    vec![
        rooted(&[("r", "a")]),
        rooted(&[("a", "r")]),
        // paths a -> b -> c rooted at a, b, c
        rooted(&[("r", "a"), ("a", "b")]),
        rooted(&[("a", "r"), ("r", "b")]),
        rooted(&[("a", "b"), ("b", "r")]),
        // out-fork rooted at the center and at a leaf
        rooted(&[("r", "a"), ("r", "b")]),
        rooted(&[("a", "r"), ("a", "b")]),
        // in-fork rooted at the center and at a leaf
        rooted(&[("a", "r"), ("b", "r")]),
        rooted(&[("r", "a"), ("b", "a")]),
        // transitive triangle rooted at source, middle, sink
        rooted(&[("r", "a"), ("a", "b"), ("r", "b")]),
        rooted(&[("a", "r"), ("r", "b"), ("a", "b")]),
        rooted(&[("a", "b"), ("b", "r"), ("a", "r")]),
        rooted(&[("r", "a"), ("a", "b"), ("b", "r")]),
    ]
}
