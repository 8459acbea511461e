//! Conversion between homomorphism counts and embedding counts.
//!
//! Patterns are tracked in labeled form: a partition of the original pattern
//! values plus a fact set over the blocks. For a labeled pattern `G`,
//!
//! ```text
//! hom(G, D) = sum over partitions Q of G, and fact supersets G' of G/Q:  emb(G', D)
//! ```
//!
//! Each right-hand pattern is strictly coarser or has strictly more facts, so
//! the system is unit triangular and can be solved for `emb` by recursion.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::rc::Rc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::iso::{canonical_form, CanonicalForm};
use super::partition::set_partitions;
use crate::error::{Error, Result};
use crate::relational::{Database, Fact, PointedDatabase, Schema, Value};

/// Linear combination of patterns with exact coefficients.
pub type Basis = Vec<(PointedDatabase, BigRational)>;

/// Above this many optional facts a single row is considered too large.
const MAX_OPEN_FACTS: usize = 20;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabeledPattern {
    /// Blocks of original value indices, sorted by least member.
    pub blocks: Vec<Vec<usize>>,
    pub root_block: usize,
    /// (relation index, block indices).
    pub facts: BTreeSet<(usize, Vec<usize>)>,
}

pub struct Lovasz {
    schema: Schema,
    rels: Vec<(String, usize)>,
    values: Vec<Value>,
    root: usize,
    memo: HashMap<LabeledPattern, Rc<BTreeMap<LabeledPattern, BigInt>>>,
}

fn tuples(k: usize, arity: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..arity {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..k).map(move |i| {
                    let mut t = t.clone();
                    t.push(i);
                    t
                })
            })
            .collect();
    }
    out
}

impl Lovasz {
    pub fn new(f: &PointedDatabase) -> Self {
        let values: Vec<Value> = f.db.adom().iter().cloned().collect();
        let root = values.iter().position(|v| *v == f.root).expect("root is a value");
        Lovasz {
            schema: f.db.schema().clone(),
            rels: f.db.schema().relations().map(|(r, a)| (r.to_string(), a)).collect(),
            values,
            root,
            memo: HashMap::new(),
        }
    }

    /// The discrete labeled pattern with the given facts (over original values).
    pub fn base(&self, facts: &BTreeSet<Fact>) -> Result<LabeledPattern> {
        let pos: HashMap<&Value, usize> = self.values.iter().enumerate().map(|(i, v)| (v, i)).collect();
        let mut out = BTreeSet::new();
        for f in facts {
            let r = self
                .rels
                .iter()
                .position(|(n, _)| *n == f.relation)
                .ok_or_else(|| Error::UnknownRelation(f.relation.clone()))?;
            let args = f
                .args
                .iter()
                .map(|a| pos.get(a).copied().ok_or_else(|| Error::Schema(format!("unknown value {a}"))))
                .collect::<Result<Vec<_>>>()?;
            out.insert((r, args));
        }
        Ok(LabeledPattern {
            blocks: (0..self.values.len()).map(|i| vec![i]).collect(),
            root_block: self.root,
            facts: out,
        })
    }

    /// Labeled patterns `G'` with `hom(key) = sum emb(G')`, each with coefficient 1.
    pub fn row(&self, key: &LabeledPattern) -> Result<Vec<LabeledPattern>> {
        let k = key.blocks.len();
        let mut out = Vec::new();
        for rgs in set_partitions(k) {
            let kk = rgs.iter().max().map_or(0, |m| m + 1);
            let mut blocks = vec![Vec::new(); kk];
            for (i, &b) in rgs.iter().enumerate() {
                blocks[b].extend_from_slice(&key.blocks[i]);
            }
            for b in &mut blocks {
                b.sort_unstable();
            }
            let base: BTreeSet<(usize, Vec<usize>)> = key
                .facts
                .iter()
                .map(|(r, args)| (*r, args.iter().map(|&a| rgs[a]).collect()))
                .collect();
            let mut open = Vec::new();
            for (r, (_, arity)) in self.rels.iter().enumerate() {
                for t in tuples(kk, *arity) {
                    let f = (r, t);
                    if !base.contains(&f) {
                        open.push(f);
                    }
                }
            }
            if open.len() > MAX_OPEN_FACTS {
                return Err(Error::Unsupported(format!(
                    "pattern too large for basis conversion ({} optional facts)",
                    open.len()
                )));
            }
            for mask in 0u64..(1u64 << open.len()) {
                let mut facts = base.clone();
                for (i, f) in open.iter().enumerate() {
                    if mask >> i & 1 == 1 {
                        facts.insert(f.clone());
                    }
                }
                out.push(LabeledPattern {
                    blocks: blocks.clone(),
                    root_block: rgs[key.root_block],
                    facts,
                });
            }
        }
        Ok(out)
    }

    /// `emb(key)` as an integer combination of labeled hom counts.
    pub fn emb_in_hom(&mut self, key: &LabeledPattern) -> Result<Rc<BTreeMap<LabeledPattern, BigInt>>> {
        if let Some(m) = self.memo.get(key) {
            return Ok(m.clone());
        }
        let mut acc: BTreeMap<LabeledPattern, BigInt> = BTreeMap::new();
        acc.insert(key.clone(), BigInt::one());
        for other in self.row(key)? {
            if other == *key {
                continue;
            }
            let sub = self.emb_in_hom(&other)?;
            for (p, c) in sub.iter() {
                *acc.entry(p.clone()).or_insert_with(BigInt::zero) -= c;
            }
        }
        acc.retain(|_, c| !c.is_zero());
        let acc = Rc::new(acc);
        self.memo.insert(key.clone(), acc.clone());
        Ok(acc)
    }

    /// Block values are named by joining the member names with `+`.
    pub fn block_value(&self, block: &[usize]) -> Value {
        let names: Vec<&str> = block.iter().map(|&i| self.values[i].as_str()).collect();
        Value::from(names.join("+"))
    }

    pub fn original_values(&self) -> &[Value] {
        &self.values
    }

    pub fn pattern(&self, key: &LabeledPattern) -> PointedDatabase {
        let names: Vec<Value> = key.blocks.iter().map(|b| self.block_value(b)).collect();
        let mut db = Database::new(self.schema.clone());
        for n in &names {
            db.add_value(n.clone());
        }
        for (r, args) in &key.facts {
            db.insert(Fact {
                relation: self.rels[*r].0.clone(),
                args: args.iter().map(|&a| names[a].clone()).collect(),
            })
            .expect("facts from schema");
        }
        PointedDatabase::new(db, names[key.root_block].clone()).expect("root exists")
    }

    /// Sums coefficients of isomorphic patterns and drops zeros.
    pub fn merge<'k>(&self, terms: impl IntoIterator<Item = (&'k LabeledPattern, BigInt)>) -> Basis {
        let mut by_form: BTreeMap<CanonicalForm, BigInt> = BTreeMap::new();
        for (k, c) in terms {
            *by_form.entry(canonical_form(&self.pattern(k))).or_insert_with(BigInt::zero) += c;
        }
        by_form
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(f, c)| (f.to_pointed(&self.schema), BigRational::from_integer(c)))
            .collect()
    }
}

/// Patterns `G_i` and coefficients `c_i` with `emb(F, D) = sum c_i hom(G_i, D)`.
pub fn emb_from_hom_basis(f: &PointedDatabase) -> Result<Basis> {
    emb_from_hom_basis_free(f, &BTreeSet::new())
}

/// As [`emb_from_hom_basis`] for an embedding query whose `free` facts are left
/// open: the result counts embeddings of every completion of the pattern.
pub fn emb_from_hom_basis_free(f: &PointedDatabase, free: &BTreeSet<Fact>) -> Result<Basis> {
    let mut lv = Lovasz::new(f);
    let terms = free_expansion(&mut lv, f, free)?;
    Ok(lv.merge(terms.iter().map(|(k, c)| (k, c.clone()))))
}

/// Labeled expansion of an embedding query with free facts: `emb` of every
/// completion, summed, as integer combination of labeled hom patterns.
pub fn free_expansion(
    lv: &mut Lovasz,
    f: &PointedDatabase,
    free: &BTreeSet<Fact>,
) -> Result<BTreeMap<LabeledPattern, BigInt>> {
    let fixed: BTreeSet<Fact> = f.db.facts().difference(free).cloned().collect();
    let free: Vec<&Fact> = free.iter().collect();
    if free.len() > MAX_OPEN_FACTS {
        return Err(Error::Unsupported("too many free facts".into()));
    }
    let mut total: BTreeMap<LabeledPattern, BigInt> = BTreeMap::new();
    for mask in 0u64..(1u64 << free.len()) {
        let mut facts = fixed.clone();
        for (i, fr) in free.iter().enumerate() {
            if mask >> i & 1 == 1 {
                facts.insert((*fr).clone());
            }
        }
        let key = lv.base(&facts)?;
        for (k, c) in lv.emb_in_hom(&key)?.iter() {
            *total.entry(k.clone()).or_insert_with(BigInt::zero) += c;
        }
    }
    total.retain(|_, c| !c.is_zero());
    Ok(total)
}

/// Patterns `G_i` and coefficients `c_i` with `hom(F, D) = sum c_i emb(G_i, D)`.
pub fn hom_from_emb_basis(f: &PointedDatabase) -> Result<Basis> {
    let lv = Lovasz::new(f);
    let key = lv.base(f.db.facts())?;
    let row = lv.row(&key)?;
    Ok(lv.merge(row.iter().map(|k| (k, BigInt::one()))))
}
