//! Homomorphism and embedding queries, network layers and forward evaluation.

mod convert;
mod gin;
mod json;

pub use convert::den_to_dhn_sum;
pub use gin::{gin_baseline, GinConfig};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hom::{Constraints, MatchMode, Matcher, TargetIndex};
use crate::neural::{Fnn, LayerNorm};
use crate::relational::{Database, EmbeddedDatabase, Fact, PointedDatabase, Value};
use crate::scalar::{indicator, pairwise_product, Scalar};

/// Per-value transformation: the component-wise product of its factors' outputs.
/// Ordinary transforms have one factor; merged pattern values multiply theirs.
#[derive(Clone, Debug, PartialEq)]
pub struct Transform<S> {
    pub factors: Vec<Fnn<S>>,
}

impl<S: Scalar> Transform<S> {
    pub fn new(f: Fnn<S>) -> Self {
        Transform { factors: vec![f] }
    }

    pub fn input_dim(&self) -> usize {
        self.factors[0].input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.factors[0].output_dim()
    }

    pub fn apply(&self, x: &[S]) -> Result<Vec<S>> {
        let mut out = self.factors[0].forward(x)?;
        for f in &self.factors[1..] {
            let y = f.forward(x)?;
            if y.len() != out.len() {
                return Err(Error::Dim {
                    expected: out.len(),
                    got: y.len(),
                });
            }
            for (o, v) in out.iter_mut().zip(y) {
                *o = o.clone() * v;
            }
        }
        Ok(out)
    }

    pub fn product(mut self, other: &Transform<S>) -> Self {
        self.factors.extend(other.factors.iter().cloned());
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Sum,
    Max,
    Mean,
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Sum => "sum",
            Aggregation::Max => "max",
            Aggregation::Mean => "mean",
        })
    }
}

/// The query `(F, mu, agg)`: aggregate, over the matches `h` of the pattern at a
/// root, the product over pattern values `v` of `mu_v(lambda(h(v)))`.
#[derive(Clone, Debug, PartialEq)]
pub struct HomQuery<S> {
    pub pattern: PointedDatabase,
    pub transforms: BTreeMap<Value, Transform<S>>,
    pub agg: Aggregation,
    pub mode: MatchMode,
    /// Pattern facts left open by embedding queries.
    pub free_facts: BTreeSet<Fact>,
    /// Excluded from training.
    pub frozen: bool,
}

impl<S: Scalar> HomQuery<S> {
    pub fn new(pattern: PointedDatabase, transforms: BTreeMap<Value, Transform<S>>, agg: Aggregation, mode: MatchMode) -> Result<Self> {
        let q = HomQuery {
            pattern,
            transforms,
            agg,
            mode,
            free_facts: BTreeSet::new(),
            frozen: false,
        };
        q.validate()?;
        Ok(q)
    }

    /// Same transform at every pattern value.
    pub fn uniform(pattern: PointedDatabase, t: Transform<S>, agg: Aggregation, mode: MatchMode) -> Result<Self> {
        let transforms = pattern.db.adom().iter().map(|v| (v.clone(), t.clone())).collect();
        Self::new(pattern, transforms, agg, mode)
    }

    pub fn validate(&self) -> Result<()> {
        let values = self.pattern.db.adom();
        if self.transforms.len() != values.len() || !values.iter().all(|v| self.transforms.contains_key(v)) {
            return Err(Error::Schema("transforms must cover exactly the pattern values".into()));
        }
        let (i, o) = (self.input_dim(), self.output_dim());
        for t in self.transforms.values() {
            if t.factors.is_empty() {
                return Err(Error::Schema("transform without factors".into()));
            }
            for f in &t.factors {
                if f.input_dim != i || f.output_dim() != o {
                    return Err(Error::Dim {
                        expected: o,
                        got: f.output_dim(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.transforms.values().next().map_or(0, Transform::input_dim)
    }

    pub fn output_dim(&self) -> usize {
        self.transforms.values().next().map_or(0, Transform::output_dim)
    }

    /// Connectivity of the required part of the pattern.
    pub fn is_connected(&self) -> bool {
        let mut db = Database::new(self.pattern.db.schema().clone());
        for v in self.pattern.db.adom() {
            db.add_value(v.clone());
        }
        for f in self.pattern.db.facts().difference(&self.free_facts) {
            db.insert(f.clone()).expect("pattern fact");
        }
        db.is_connected()
    }

    pub fn is_simple(&self) -> bool {
        self.transforms.values().all(|t| t.factors.len() == 1 && t.factors[0].is_simple())
    }
}

/// Threshold comparator used by compiled ratio formulas. Input is
/// `(fraction, any, x)` with `x` of length `dim`; output is `x` with
/// coordinate `slot` replaced by the comparison result. When `any` is zero the
/// ratio has an empty denominator: `>=` holds and `>` fails.
#[derive(Clone, Debug, PartialEq)]
pub struct RatioComparator<S> {
    pub dim: usize,
    pub slot: usize,
    pub threshold: S,
    pub strict: bool,
}

impl<S: Scalar> RatioComparator<S> {
    pub fn apply(&self, x: &[S]) -> Result<Vec<S>> {
        if x.len() != self.dim + 2 {
            return Err(Error::Dim {
                expected: self.dim + 2,
                got: x.len(),
            });
        }
        let holds = if x[1].is_zero() {
            !self.strict
        } else if self.strict {
            x[0] > self.threshold
        } else {
            x[0] >= self.threshold
        };
        let mut out = x[2..].to_vec();
        out[self.slot] = indicator(holds);
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Combine<S> {
    Fnn(Fnn<S>),
    Ratio(RatioComparator<S>),
}

impl<S: Scalar> Combine<S> {
    pub fn input_dim(&self) -> usize {
        match self {
            Combine::Fnn(f) => f.input_dim,
            Combine::Ratio(r) => r.dim + 2,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Combine::Fnn(f) => f.output_dim(),
            Combine::Ratio(r) => r.dim,
        }
    }

    pub fn apply(&self, x: &[S]) -> Result<Vec<S>> {
        match self {
            Combine::Fnn(f) => f.forward(x),
            Combine::Ratio(r) => r.apply(x),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DhnLayer<S> {
    pub queries: Vec<HomQuery<S>>,
    pub combine: Combine<S>,
    pub layer_norm: Option<LayerNorm<S>>,
}

impl<S: Scalar> DhnLayer<S> {
    pub fn new(queries: Vec<HomQuery<S>>, combine: Combine<S>) -> Result<Self> {
        let l = DhnLayer {
            queries,
            combine,
            layer_norm: None,
        };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.input_dim();
        for q in &self.queries {
            q.validate()?;
            if q.input_dim() != d {
                return Err(Error::Dim {
                    expected: d,
                    got: q.input_dim(),
                });
            }
        }
        let total: usize = self.queries.iter().map(HomQuery::output_dim).sum();
        if total != self.combine.input_dim() {
            return Err(Error::Dim {
                expected: self.combine.input_dim(),
                got: total,
            });
        }
        if let Some(ln) = &self.layer_norm {
            if ln.gamma.len() != self.output_dim() {
                return Err(Error::Dim {
                    expected: self.output_dim(),
                    got: ln.gamma.len(),
                });
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.queries.first().map_or(0, HomQuery::input_dim)
    }

    pub fn output_dim(&self) -> usize {
        self.combine.output_dim()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Classifier<S> {
    /// Accept iff `x[coord] >= value` (or `>` when strict).
    Threshold { coord: usize, value: S, strict: bool },
    /// Accept iff `net(x)[0] > threshold`.
    Fnn { net: Fnn<S>, threshold: S },
}

impl<S: Scalar> Classifier<S> {
    /// Score whose sign relative to the threshold decides acceptance.
    pub fn score(&self, x: &[S]) -> Result<S> {
        match self {
            Classifier::Threshold { coord, .. } => x
                .get(*coord)
                .cloned()
                .ok_or(Error::Dim {
                    expected: coord + 1,
                    got: x.len(),
                }),
            Classifier::Fnn { net, .. } => Ok(net.forward(x)?[0].clone()),
        }
    }

    pub fn accepts(&self, x: &[S]) -> Result<bool> {
        let s = self.score(x)?;
        Ok(match self {
            Classifier::Threshold { value, strict, .. } => {
                if *strict {
                    s > *value
                } else {
                    s >= *value
                }
            }
            Classifier::Fnn { threshold, .. } => s > *threshold,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dhn<S> {
    pub layers: Vec<DhnLayer<S>>,
    pub classifier: Classifier<S>,
}

#[derive(Clone, Debug)]
pub struct RunResult<S> {
    pub accept: bool,
    pub trace: Vec<EmbeddedDatabase<S>>,
}

impl<S: Scalar> Dhn<S> {
    pub fn new(layers: Vec<DhnLayer<S>>, classifier: Classifier<S>) -> Result<Self> {
        let n = Dhn { layers, classifier };
        n.validate()?;
        Ok(n)
    }

    pub fn validate(&self) -> Result<()> {
        let mut d = self.input_dim();
        for l in &self.layers {
            l.validate()?;
            if !l.queries.is_empty() && l.input_dim() != d {
                return Err(Error::Dim {
                    expected: d,
                    got: l.input_dim(),
                });
            }
            d = l.output_dim();
        }
        if let Classifier::Fnn { net, .. } = &self.classifier {
            if net.input_dim != d {
                return Err(Error::Dim {
                    expected: d,
                    got: net.input_dim,
                });
            }
        }
        Ok(())
    }

    /// Dimension of the initial embedding; 0 for networks run on plain databases.
    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, DhnLayer::input_dim)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, DhnLayer::output_dim)
    }

    pub fn queries(&self) -> impl Iterator<Item = &HomQuery<S>> {
        self.layers.iter().flat_map(|l| l.queries.iter())
    }

    /// All transforms and combines are one affine map with ReLU*, and the
    /// classifier is a non-strict threshold on one coordinate.
    pub fn is_simple(&self) -> bool {
        self.layers.iter().all(|l| {
            l.layer_norm.is_none()
                && l.queries.iter().all(HomQuery::is_simple)
                && matches!(&l.combine, Combine::Fnn(f) if f.is_simple())
        }) && matches!(self.classifier, Classifier::Threshold { strict: false, .. })
    }

    pub fn is_connected(&self) -> bool {
        self.queries().all(HomQuery::is_connected)
    }

    /// Largest number of values in any pattern.
    pub fn max_pattern_size(&self) -> usize {
        self.queries().map(|q| q.pattern.db.num_values()).max().unwrap_or(1)
    }

    /// Evaluates every layer on `db`; the trace starts with the empty embedding.
    pub fn trace(&self, db: &Database) -> Result<Vec<EmbeddedDatabase<S>>> {
        self.trace_embedded(EmbeddedDatabase::empty(Arc::new(db.clone())))
    }

    /// Evaluates every layer starting from a given embedding.
    pub fn trace_embedded(&self, start: EmbeddedDatabase<S>) -> Result<Vec<EmbeddedDatabase<S>>> {
        let mut cur = start;
        let mut trace = Vec::with_capacity(self.layers.len() + 1);
        for l in &self.layers {
            let next = layer_apply(l, &cur)?;
            trace.push(cur);
            cur = next;
        }
        trace.push(cur);
        Ok(trace)
    }

    pub fn run(&self, pdb: &PointedDatabase) -> Result<RunResult<S>> {
        let trace = self.trace(&pdb.db)?;
        let last = trace.last().expect("non-empty trace");
        let x = last
            .get(&pdb.root)
            .ok_or_else(|| Error::MissingRoot(pdb.root.to_string()))?;
        let accept = self.classifier.accepts(x)?;
        Ok(RunResult { accept, trace })
    }

    /// Acceptance at every value of `db`, from one forward pass.
    pub fn run_all(&self, db: &Database) -> Result<BTreeMap<Value, bool>> {
        let trace = self.trace(db)?;
        let last = trace.last().expect("non-empty trace");
        last.embedding
            .iter()
            .map(|(v, x)| Ok((v.clone(), self.classifier.accepts(x)?)))
            .collect()
    }
}

/// Results of `q` at the given roots (target indices).
pub fn eval_query_at<S: Scalar>(q: &HomQuery<S>, target: &EmbeddedDatabase<S>, idx: &TargetIndex, roots: &[u32]) -> Result<Vec<Vec<S>>> {
    if q.input_dim() != target.dim {
        return Err(Error::Dim {
            expected: q.input_dim(),
            got: target.dim,
        });
    }
    let c = Constraints::with_free_facts(q.free_facts.clone());
    let m = Matcher::new(&q.pattern.db, Some(&q.pattern.root), q.mode, &c)?;
    let vars: Vec<Value> = m.vars().to_vec();
    let transforms: Vec<&Transform<S>> = vars.iter().map(|v| &q.transforms[v]).collect();
    let dim = q.output_dim();
    let mut table: Vec<Vec<Option<Vec<S>>>> = vec![vec![None; idx.len()]; vars.len()];
    let mut out = Vec::with_capacity(roots.len());
    for &r in roots {
        let mut acc: Vec<S> = vec![S::zero(); dim];
        let mut n_matches: i64 = 0;
        let mut matches = m.matches_at(idx, Some(r))?;
        while let Some(h) = matches.next_raw() {
            for (p, &t) in h.iter().enumerate() {
                if table[p][t as usize].is_none() {
                    let x = target
                        .get(&idx.values()[t as usize])
                        .ok_or_else(|| Error::Schema("embedding misses a value".into()))?;
                    table[p][t as usize] = Some(transforms[p].apply(x)?);
                }
            }
            for (c, a) in acc.iter_mut().enumerate() {
                let prod = pairwise_product(
                    h.iter()
                        .enumerate()
                        .map(|(p, &t)| table[p][t as usize].as_ref().expect("filled")[c].clone())
                        .collect(),
                );
                *a = match q.agg {
                    Aggregation::Sum | Aggregation::Mean => a.clone() + prod,
                    Aggregation::Max if n_matches == 0 => prod,
                    Aggregation::Max => S::max_of(a.clone(), prod),
                };
            }
            n_matches += 1;
        }
        if q.agg == Aggregation::Mean && n_matches > 0 {
            let n = S::from_i64(n_matches);
            for a in &mut acc {
                *a = a.clone() / n.clone();
            }
        }
        out.push(acc);
    }
    Ok(out)
}

/// Result of `q` at `root`. Empty match sets give the zero vector.
pub fn eval_query<S: Scalar>(q: &HomQuery<S>, target: &EmbeddedDatabase<S>, root: &Value) -> Result<Vec<S>> {
    let idx = TargetIndex::new(&target.db);
    let r = idx.id(root).ok_or_else(|| Error::MissingRoot(root.to_string()))?;
    Ok(eval_query_at(q, target, &idx, &[r])?.pop().expect("one root"))
}

pub fn layer_apply<S: Scalar>(layer: &DhnLayer<S>, target: &EmbeddedDatabase<S>) -> Result<EmbeddedDatabase<S>> {
    let idx = TargetIndex::new(&target.db);
    let roots: Vec<u32> = (0..idx.len() as u32).collect();
    let results: Vec<Vec<Vec<S>>> = layer
        .queries
        .iter()
        .map(|q| eval_query_at(q, target, &idx, &roots))
        .collect::<Result<_>>()?;
    let mut embedding = BTreeMap::new();
    for (i, v) in idx.values().iter().enumerate() {
        let x: Vec<S> = results.iter().flat_map(|r| r[i].iter().cloned()).collect();
        let mut y = layer.combine.apply(&x)?;
        if let Some(ln) = &layer.layer_norm {
            y = ln.forward(&y)?.0;
        }
        embedding.insert(v.clone(), y);
    }
    EmbeddedDatabase::new(target.db.clone(), layer.output_dim(), embedding)
}
