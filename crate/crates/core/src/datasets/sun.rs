use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Dataset, GENERATOR_VERSION};
use crate::error::Result;
use crate::relational::{Database, Fact, PointedDatabase, Schema, Value};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SunParams {
    pub n_pos: usize,
    pub n_neg: usize,
    /// Degree of a fattened pendant is drawn from `2..=max_extra_degree`.
    pub max_extra_degree: usize,
    /// Each component gets `0..=max_decorations` negative suns attached by a
    /// bridge edge to one of its cycle vertices.
    pub max_decorations: usize,
}

impl Default for SunParams {
    fn default() -> Self {
        SunParams {
            n_pos: 100,
            n_neg: 100,
            max_extra_degree: 8,
            max_decorations: 2,
        }
    }
}

struct Builder {
    edges: Vec<(String, String)>,
    values: Vec<String>,
}

impl Builder {
    fn edge(&mut self, a: &str, b: &str) {
        self.edges.push((a.to_string(), b.to_string()));
    }

    fn value(&mut self, v: String) -> String {
        self.values.push(v.clone());
        v
    }

    /// A 6-cycle with one pendant per cycle vertex; in a negative sun one
    /// pendant gets extra leaves. Returns the cycle and all values.
    fn sun<R: Rng>(&mut self, rng: &mut R, prefix: &str, negative: bool, max_degree: usize) -> (Vec<String>, Vec<String>) {
        let start = self.values.len();
        let cycle: Vec<String> = (0..6).map(|i| self.value(format!("{prefix}c{i}"))).collect();
        for i in 0..6 {
            self.edge(&cycle[i].clone(), &cycle[(i + 1) % 6].clone());
            let p = self.value(format!("{prefix}p{i}"));
            self.edge(&cycle[i].clone(), &p);
        }
        if negative {
            let i = rng.gen_range(0..6);
            let degree = rng.gen_range(2..=max_degree.max(2));
            for j in 1..degree {
                let q = self.value(format!("{prefix}q{j}"));
                self.edge(&format!("{prefix}p{i}"), &q);
            }
        }
        (cycle, self.values[start..].to_vec())
    }
}

fn neighbors(db: &Database) -> BTreeMap<&Value, BTreeSet<&Value>> {
    let mut out: BTreeMap<&Value, BTreeSet<&Value>> = BTreeMap::new();
    for f in db.facts() {
        if f.relation == "E" {
            out.entry(&f.args[0]).or_default().insert(&f.args[1]);
        }
    }
    out
}

fn on_good_cycle(out: &BTreeMap<&Value, BTreeSet<&Value>>, v: &Value) -> bool {
    let empty = BTreeSet::new();
    let succ = |u: &Value| out.get(u).unwrap_or(&empty);
    let good = |u: &Value| succ(u).iter().any(|y| succ(y).len() == 1);
    fn extend<'a>(path: &mut Vec<&'a Value>, succ: &dyn Fn(&Value) -> &'a BTreeSet<&'a Value>, good: &dyn Fn(&Value) -> bool) -> bool {
        let last = *path.last().expect("non-empty path");
        if path.len() == 6 {
            return succ(last).contains(path[0]);
        }
        for &w in succ(last) {
            if !path.contains(&w) && good(w) {
                path.push(w);
                if extend(path, succ, good) {
                    return true;
                }
                path.pop();
            }
        }
        false
    }
    good(v) && extend(&mut vec![v], &succ, &good)
}

/// Whether `v` lies on a cycle of six distinct vertices each of which has a
/// neighbor of degree one.
pub fn oracle_sun(db: &Database, v: &Value) -> bool {
    on_good_cycle(&neighbors(db), v)
}

/// Disjoint positive and negative suns, optionally decorated with attached
/// negative suns. Only the main cycle vertices are examples.
pub fn gen_sun(seed: u64, params: &SunParams) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = Builder {
        edges: Vec::new(),
        values: Vec::new(),
    };
    let mut labels = BTreeMap::new();
    for k in 0..params.n_pos + params.n_neg {
        let negative = k >= params.n_pos;
        let prefix = format!("s{k}_");
        let (cycle, _) = b.sun(&mut rng, &prefix, negative, params.max_extra_degree);
        for c in &cycle {
            labels.insert(Value::from(c.clone()), !negative);
        }
        for d in 0..rng.gen_range(0..=params.max_decorations) {
            let (_, values) = b.sun(&mut rng, &format!("{prefix}d{d}_"), true, params.max_extra_degree);
            let from = values[rng.gen_range(0..values.len())].clone();
            let to = cycle[rng.gen_range(0..6)].clone();
            b.edge(&from, &to);
        }
    }
    let mut db = Database::new(Schema::graph());
    for v in &b.values {
        db.add_value(Value::from(v.clone()));
    }
    for (x, y) in &b.edges {
        db.insert(Fact::new("E", &[x, y]))?;
        db.insert(Fact::new("E", &[y, x]))?;
    }
    Ok(Dataset {
        db,
        labels,
        meta: json!({
            "generator": "sun",
            "version": GENERATOR_VERSION,
            "seed": seed,
            "params": params,
            "rng": "chacha8",
            "decoration_attachment": "bridge edge from a random decoration vertex to a random cycle vertex",
        }),
    })
}

fn symmetric(edges: &[(&str, &str)]) -> PointedDatabase {
    let both: Vec<(&str, &str)> = edges.iter().flat_map(|&(a, b)| [(a, b), (b, a)]).collect();
    PointedDatabase::new(Database::from_edges(&both), Value::new("r")).expect("root occurs in an edge")
}

/// Rooted undirected 6-cycle and single edge.
pub fn sun_patterns() -> Vec<PointedDatabase> {
    vec![
        symmetric(&[("r", "a1"), ("a1", "a2"), ("a2", "a3"), ("a3", "a4"), ("a4", "a5"), ("a5", "r")]),
        symmetric(&[("r", "a")]),
    ]
}
