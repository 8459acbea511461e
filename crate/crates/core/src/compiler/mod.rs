//! Formula-to-network compilation.
//!
//! Every compiled network has one layer per distinct subformula, in
//! post-order. Layer `i` keeps coordinates `0..i` of its input and writes the
//! truth value of subformula `i` into coordinate `i`, so after the last layer
//! the final coordinate holds the truth of the whole formula.

mod equiv;
mod lt;

pub use equiv::{check_equivalence, Disagreement, EquivConfig, EquivReport};
pub use lt::local_transitivity_network;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::dhn::{Aggregation, Classifier, Combine, Dhn, DhnLayer, HomQuery, RatioComparator, Transform};
use crate::error::{Error, Result};
use crate::hom::MatchMode;
use crate::logic::{is_strict, Block, Formula};
use crate::neural::{Activation, Dense, Fnn};
use crate::relational::{Database, Fact, PointedDatabase, Schema, Value};
use crate::sample::all_databases;
use crate::scalar::Scalar;

/// Compilation targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    MaxDhn,
    SumDhn,
    MaxDen,
    SumDen,
    MeanDhn,
}

impl std::str::FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "max-dhn" => Target::MaxDhn,
            "sum-dhn" => Target::SumDhn,
            "max-den" => Target::MaxDen,
            "sum-den" => Target::SumDen,
            "mean-dhn" => Target::MeanDhn,
            _ => return Err(Error::Parse(format!("unknown target `{s}`"))),
        })
    }
}

/// A distinct subformula with children replaced by their indices.
#[derive(Clone, Debug)]
pub enum Node {
    Not(usize),
    Or(usize, usize),
    And(usize, usize),
    /// `Exists` is `Count(1, ..)`.
    Count(u64, Block, Vec<(String, usize)>),
    Ratio { strict: bool, threshold: crate::Rational, block: Block, subs: Vec<(String, usize)> },
}

/// Distinct subformulas in post-order; children always precede parents.
/// Subformulas are identified by their printed form with the free variable
/// renamed to `x`.
pub fn subformulas(f: &Formula) -> Result<Vec<Node>> {
    let mut nodes = Vec::new();
    let mut index = HashMap::new();
    visit(f, &mut nodes, &mut index)?;
    Ok(nodes)
}

fn visit(f: &Formula, nodes: &mut Vec<Node>, index: &mut HashMap<String, usize>) -> Result<usize> {
    let key = f.with_free("x").to_string();
    if let Some(&i) = index.get(&key) {
        return Ok(i);
    }
    let block_subs = |b: &Block, nodes: &mut Vec<Node>, index: &mut HashMap<String, usize>| -> Result<Vec<(String, usize)>> {
        b.subs.iter().map(|(v, g)| Ok((v.clone(), visit(g, nodes, index)?))).collect()
    };
    let node = match f {
        Formula::Not(g) => Node::Not(visit(g, nodes, index)?),
        Formula::Or(a, b) => {
            let a = visit(a, nodes, index)?;
            Node::Or(a, visit(b, nodes, index)?)
        }
        Formula::And(a, b) => {
            let a = visit(a, nodes, index)?;
            Node::And(a, visit(b, nodes, index)?)
        }
        Formula::Exists(b) => Node::Count(1, b.clone(), block_subs(b, nodes, index)?),
        Formula::Count(n, b) => Node::Count(*n, b.clone(), block_subs(b, nodes, index)?),
        Formula::Ratio { strict, threshold, block } => Node::Ratio {
            strict: *strict,
            threshold: threshold.clone(),
            subs: block_subs(block, nodes, index)?,
            block: block.clone(),
        },
        Formula::Graded { .. } => return Err(Error::Unsupported("graded blocks are not compiled; use counting blocks".into())),
    };
    nodes.push(node);
    let i = nodes.len() - 1;
    index.insert(key, i);
    Ok(i)
}

fn relu_star<S: Scalar>(inputs: usize, outputs: usize) -> Dense<S> {
    Dense::zeros(inputs, outputs, Activation::ReluStar)
}

/// `ReluStar` copy of the input, with column `slot` left to the caller.
fn copy_dense<S: Scalar>(k: usize) -> Dense<S> {
    let mut d = relu_star(k, k);
    for j in 0..k {
        d.set_w(j, j, S::one());
    }
    d
}

/// Conjunction of the given coordinates, or the constant 1.
fn conj_transform<S: Scalar>(d_in: usize, coords: &BTreeSet<usize>) -> Transform<S> {
    let mut d = relu_star(d_in, 1);
    for &j in coords {
        d.set_w(j, 0, S::one());
    }
    d.bias[0] = S::from_i64(1 - coords.len() as i64);
    Transform::new(Fnn::single(d))
}

fn constant_transform<S: Scalar>(d_in: usize, value: i64) -> Transform<S> {
    let mut d = relu_star(d_in, 1);
    d.bias[0] = S::from_i64(value);
    Transform::new(Fnn::single(d))
}

/// Identity on `k` coordinates, or zeros when there is no input yet.
fn copy_transform<S: Scalar>(d_in: usize, k: usize) -> Transform<S> {
    if d_in == 0 {
        Transform::new(Fnn::single(relu_star(0, k)))
    } else {
        Transform::new(Fnn::single(copy_dense(k)))
    }
}

/// Boolean layer transform: copy, with column `i` computing node `i`.
fn boolean_transform<S: Scalar>(node: &Node, i: usize, k: usize) -> Transform<S> {
    let mut d = copy_dense::<S>(k);
    d.set_w(i, i, S::zero());
    match *node {
        Node::Not(j) => {
            d.set_w(j, i, -S::one());
            d.bias[i] = S::one();
        }
        Node::Or(a, b) => {
            d.set_w(a, i, S::one());
            d.set_w(b, i, d.w(b, i).clone() + S::one());
        }
        Node::And(a, b) => {
            d.set_w(a, i, S::one());
            d.set_w(b, i, d.w(b, i).clone() + S::one());
            d.bias[i] = -S::one();
        }
        _ => unreachable!("boolean node"),
    }
    Transform::new(Fnn::single(d))
}

fn single_vertex(schema: &Schema) -> PointedDatabase {
    PointedDatabase::single(schema.clone(), "x")
}

/// The block's pattern: its variables with its positive (and open) atoms.
fn block_pattern(b: &Block, schema: &Schema) -> Result<(PointedDatabase, BTreeSet<Fact>)> {
    let mut db = Database::new(schema.clone());
    for v in b.all_vars() {
        db.add_value(Value::from(v));
    }
    let fact = |a: &crate::logic::Atom| Fact::new(&a.relation, &a.args.iter().map(String::as_str).collect::<Vec<_>>());
    for a in &b.atoms {
        db.insert(fact(a))?;
    }
    let mut free = BTreeSet::new();
    for a in &b.any {
        let f = fact(a);
        db.insert(f.clone())?;
        free.insert(f);
    }
    Ok((PointedDatabase::new(db, Value::from(b.free.clone()))?, free))
}

/// Per-variable conjunctions of the attached subformulas.
fn sub_transforms<S: Scalar>(b: &Block, subs: &[(String, usize)], d_in: usize) -> BTreeMap<Value, Transform<S>> {
    let mut by_var: BTreeMap<String, BTreeSet<usize>> = b.all_vars().into_iter().map(|v| (v, BTreeSet::new())).collect();
    for (v, j) in subs {
        by_var.get_mut(v).expect("sub on block variable").insert(*j);
    }
    by_var.into_iter().map(|(v, s)| (Value::from(v), conj_transform(d_in, &s))).collect()
}

struct Ctx<'a> {
    schema: &'a Schema,
    agg: Aggregation,
    mode: MatchMode,
    k: usize,
    /// Single-value databases used as copy patterns in embedding mode.
    singles: Vec<PointedDatabase>,
}

impl Ctx<'_> {
    fn copy_patterns(&self) -> Vec<PointedDatabase> {
        if self.mode == MatchMode::Embedding {
            self.singles.clone()
        } else {
            vec![single_vertex(self.schema)]
        }
    }

    fn query<S: Scalar>(&self, pattern: PointedDatabase, transforms: BTreeMap<Value, Transform<S>>) -> Result<HomQuery<S>> {
        HomQuery::new(pattern, transforms, self.agg, self.mode)
    }

    /// Combine summing `blocks` copies of `k` coordinates, after `lead` leading inputs.
    fn sum_blocks<S: Scalar>(&self, lead: usize, blocks: usize) -> Dense<S> {
        let k = self.k;
        let mut d = relu_star(lead + blocks * k, k);
        for b in 0..blocks {
            for j in 0..k {
                d.set_w(lead + b * k + j, j, S::one());
            }
        }
        d
    }

    fn boolean_layer<S: Scalar>(&self, node: &Node, i: usize) -> Result<DhnLayer<S>> {
        let t = boolean_transform::<S>(node, i, self.k);
        let patterns = self.copy_patterns();
        let queries = patterns
            .into_iter()
            .map(|p| {
                let tr = p.db.adom().iter().map(|v| (v.clone(), t.clone())).collect();
                self.query(p, tr)
            })
            .collect::<Result<Vec<_>>>()?;
        let n = queries.len();
        DhnLayer::new(queries, Combine::Fnn(Fnn::single(self.sum_blocks(0, n))))
    }

    fn copy_queries<S: Scalar>(&self, d_in: usize) -> Result<Vec<HomQuery<S>>> {
        self.copy_patterns()
            .into_iter()
            .map(|p| {
                let tr = p.db.adom().iter().map(|v| (v.clone(), copy_transform(d_in, self.k))).collect();
                self.query(p, tr)
            })
            .collect()
    }

    fn count_layer<S: Scalar>(&self, n: u64, b: &Block, subs: &[(String, usize)], i: usize, d_in: usize) -> Result<DhnLayer<S>> {
        let (pattern, free) = block_pattern(b, self.schema)?;
        let mut q1 = self.query(pattern, sub_transforms(b, subs, d_in))?;
        q1.free_facts = free;
        let copies = self.copy_queries(d_in)?;
        let blocks = copies.len();
        let mut queries = vec![q1];
        queries.extend(copies);
        let mut d = self.sum_blocks::<S>(1, blocks);
        for r in 0..d.inputs {
            d.set_w(r, i, S::zero());
        }
        d.set_w(0, i, S::one());
        d.bias[i] = S::from_i64(1 - n as i64);
        DhnLayer::new(queries, Combine::Fnn(Fnn::single(d)))
    }

    fn ratio_layer<S: Scalar>(&self, strict: bool, threshold: &crate::Rational, b: &Block, subs: &[(String, usize)], i: usize, d_in: usize) -> Result<DhnLayer<S>> {
        if !b.negated.is_empty() || !b.distinct.is_empty() || !b.any.is_empty() {
            return Err(Error::Unsupported("ratio blocks must be plain".into()));
        }
        let (pattern, _) = block_pattern(b, self.schema)?;
        let frac = self.query(pattern.clone(), sub_transforms(b, subs, d_in))?;
        let ones = pattern.db.adom().iter().map(|v| (v.clone(), constant_transform(d_in, 1))).collect();
        let any = self.query(pattern, ones)?;
        let mut queries = vec![frac, any];
        queries.extend(self.copy_queries(d_in)?);
        DhnLayer::new(
            queries,
            Combine::Ratio(RatioComparator {
                dim: self.k,
                slot: i,
                threshold: S::from_rational(threshold),
                strict,
            }),
        )
    }

    fn compile<S: Scalar>(&self, nodes: &[Node]) -> Result<Dhn<S>> {
        let k = self.k;
        let mut layers = Vec::with_capacity(k);
        for (i, node) in nodes.iter().enumerate() {
            let d_in = if i == 0 { 0 } else { k };
            let layer = match node {
                Node::Not(_) | Node::Or(..) | Node::And(..) => self.boolean_layer(node, i)?,
                Node::Count(n, b, subs) if self.agg == Aggregation::Mean => {
                    if *n != 1 {
                        return Err(Error::Unsupported("counting blocks are not RHML".into()));
                    }
                    self.ratio_layer(true, &crate::Rational::from_integer(0.into()), b, subs, i, d_in)?
                }
                Node::Count(n, b, subs) => self.count_layer(*n, b, subs, i, d_in)?,
                Node::Ratio { strict, threshold, block, subs } => self.ratio_layer(*strict, threshold, block, subs, i, d_in)?,
            };
            layers.push(layer);
        }
        Dhn::new(
            layers,
            Classifier::Threshold {
                coord: k - 1,
                value: S::one(),
                strict: false,
            },
        )
    }
}

fn compile_with<S: Scalar>(f: &Formula, schema: Schema, agg: Aggregation, mode: MatchMode) -> Result<Dhn<S>> {
    f.validate_with(Some(&schema))?;
    let nodes = subformulas(f)?;
    let singles = if mode == MatchMode::Embedding {
        all_databases(&schema, 1, 1 << 16)
            .ok_or_else(|| Error::Unsupported("schema has too many single-value databases".into()))?
            .into_iter()
            .map(|db| PointedDatabase::new(db, Value::new("v0")))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let ctx = Ctx {
        schema: &schema,
        agg,
        mode,
        k: nodes.len(),
        singles,
    };
    ctx.compile(&nodes)
}

/// HML formula to an equivalent simple max-DHN.
pub fn compile_hml_max<S: Scalar>(f: &Formula) -> Result<Dhn<S>> {
    if !f.is_hml() {
        return Err(Error::Unsupported("compile_hml_max needs an HML formula".into()));
    }
    compile_with(f, f.schema(), Aggregation::Max, MatchMode::Hom)
}

/// GHML⁻ formula to an equivalent simple sum-DHN; connected formulas give
/// connected networks.
pub fn compile_ghmlminus_sum<S: Scalar>(f: &Formula) -> Result<Dhn<S>> {
    if !f.is_ghml_minus() {
        return Err(Error::Unsupported("compile_ghmlminus_sum needs a GHML⁻ formula".into()));
    }
    compile_with(f, f.schema(), Aggregation::Sum, MatchMode::Hom)
}

fn check_strict(f: &Formula, schema: &Schema) -> Result<Schema> {
    let schema = schema.union(&f.schema())?;
    if !is_strict(f, &schema) {
        return Err(Error::Unsupported("DEN compilation needs a strict EML formula; call strictify first".into()));
    }
    Ok(schema)
}

/// Strict EML formula over `schema` to an equivalent max-DEN.
pub fn compile_eml_max_den<S: Scalar>(f: &Formula, schema: &Schema) -> Result<Dhn<S>> {
    let schema = check_strict(f, schema)?;
    compile_with(f, schema, Aggregation::Max, MatchMode::Embedding)
}

/// Strict EML formula over `schema` to an equivalent sum-DEN.
pub fn compile_eml_sum_den<S: Scalar>(f: &Formula, schema: &Schema) -> Result<Dhn<S>> {
    let schema = check_strict(f, schema)?;
    compile_with(f, schema, Aggregation::Sum, MatchMode::Embedding)
}

/// RHML formula to an equivalent mean-DHN with exact comparator combines.
/// Plain existential blocks are compiled as `∃_{>0}`.
pub fn compile_rhml_mean<S: Scalar>(f: &Formula) -> Result<Dhn<S>> {
    if !f.is_rhml() {
        return Err(Error::Unsupported("compile_rhml_mean needs an RHML formula".into()));
    }
    compile_with(f, f.schema(), Aggregation::Mean, MatchMode::Hom)
}

/// Dispatches on `target`. DEN targets strictify the formula over `schema`
/// (extended with the formula's own relations) first.
pub fn compile<S: Scalar>(f: &Formula, target: Target, schema: &Schema) -> Result<Dhn<S>> {
    match target {
        Target::MaxDhn => compile_hml_max(f),
        Target::SumDhn => compile_ghmlminus_sum(f),
        Target::MeanDhn => compile_rhml_mean(f),
        Target::MaxDen | Target::SumDen => {
            let schema = schema.union(&f.schema())?;
            let s = crate::logic::strictify(f, &schema)?;
            if target == Target::MaxDen {
                compile_eml_max_den(&s, &schema)
            } else {
                compile_eml_sum_den(&s, &schema)
            }
        }
    }
}

#[cfg(test)]
mod tests;
