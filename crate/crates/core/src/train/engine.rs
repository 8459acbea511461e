//! Batched forward and reverse passes of a float network over one fixed
//! database. Matches of every query pattern are enumerated once up front;
//! each epoch then only does dense algebra plus a sweep over the match lists.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};

use crate::dhn::{Aggregation, Classifier, Combine, Dhn};
use crate::error::{Error, Result};
use crate::hom::{Constraints, MatchMode, Matcher, TargetIndex};
use crate::neural::{Activation, Fnn};
use crate::relational::{Database, Fact, PointedDatabase, Value};

/// Matches grouped by root: those of root `r` are rows
/// `start[r]..start[r+1]` of `assign`, each row holding one target index per
/// pattern value.
struct MatchTable {
    width: usize,
    start: Vec<usize>,
    assign: Vec<u32>,
}

impl MatchTable {
    fn row(&self, m: usize) -> &[u32] {
        &self.assign[m * self.width..(m + 1) * self.width]
    }
}

#[derive(Clone)]
struct DenseSpec {
    w: usize,
    b: usize,
    inputs: usize,
    outputs: usize,
    act: Activation<f64>,
}

#[derive(Clone)]
struct MlpSpec {
    layers: Vec<DenseSpec>,
}

struct MlpTape {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
}

/// A sum query over a tree-shaped pattern in hom mode: the sum over matches
/// factorizes into messages passed from the leaves to the root.
struct TreePlan {
    /// Pre-order; node 0 is the root.
    nodes: Vec<TreeNode>,
}

struct TreeNode {
    /// Position of the node's value among the query transforms.
    var: usize,
    children: Vec<usize>,
    /// Values the node may map to, from its unary facts and loops.
    mask: Option<Vec<bool>>,
    /// No fact links the node to its parent: it ranges over every value and
    /// its message is the same global sum at every parent image.
    free: bool,
    /// For a non-root node: admissible images given the parent's image `x`
    /// are `nbr[start[x]..start[x+1]]`.
    start: Vec<usize>,
    nbr: Vec<u32>,
}

#[derive(Clone, Copy)]
enum Plan {
    Table(usize),
    Tree(usize),
}

struct QuerySpec {
    plan: Plan,
    /// One network per pattern value, in match-row order.
    transforms: Vec<MlpSpec>,
    agg: Aggregation,
    dim: usize,
}

struct NormSpec {
    gamma: usize,
    beta: usize,
    dim: usize,
    eps: f64,
}

struct LayerSpec {
    queries: Vec<QuerySpec>,
    combine: MlpSpec,
    norm: Option<NormSpec>,
}

enum Head {
    Coord(usize),
    Mlp(MlpSpec),
}

struct QueryTape {
    t: Vec<Array2<f64>>,
    tapes: Vec<MlpTape>,
    /// For max aggregation: winning match per (root, coordinate).
    argmax: Option<Array2<u32>>,
    /// For tree plans: subtree sums `S` and messages `M` per node.
    tree: Option<(Vec<Vec<f64>>, Vec<Vec<f64>>)>,
}

struct LayerTape {
    input: Array2<f64>,
    queries: Vec<QueryTape>,
    combine: MlpTape,
    /// Normalized values and inverse standard deviations per row.
    norm: Option<(Array2<f64>, Array1<f64>)>,
}

pub struct Tape {
    layers: Vec<LayerTape>,
    head: Option<MlpTape>,
    final_h: Array2<f64>,
}

/// A network compiled against one database. Parameters live in a flat vector
/// so a single optimizer step covers them all.
pub struct Engine {
    pub params: Vec<f64>,
    /// False for parameters of frozen queries.
    pub trainable: Vec<bool>,
    tables: Vec<MatchTable>,
    trees: Vec<TreePlan>,
    layers: Vec<LayerSpec>,
    head: Head,
    n: usize,
    input_dim: usize,
    values: Vec<Value>,
}

/// Message-passing plan when the pattern has only unary and binary facts
/// and its Gaifman graph is a tree.
fn tree_plan(p: &PointedDatabase, vars: &[Value], db: &Database, idx: &TargetIndex) -> Option<TreePlan> {
    let facts = p.db.facts();
    if facts.iter().any(|f| f.args.is_empty() || f.args.len() > 2) {
        return None;
    }
    let values: Vec<&Value> = p.db.adom().iter().collect();
    let mut adj: BTreeMap<&Value, Vec<&Value>> = BTreeMap::new();
    let mut edges = 0;
    for f in facts {
        let (a, b) = (&f.args[0], &f.args[f.args.len() - 1]);
        if a != b && !adj.get(a).is_some_and(|s| s.contains(&b)) {
            adj.entry(a).or_default().push(b);
            adj.entry(b).or_default().push(a);
            edges += 1;
        }
    }
    // Breadth-first from the root; every further component hangs off the
    // root through a free link. A forest has |V| - components edges.
    let mut order: Vec<(&Value, Option<usize>)> = vec![(&p.root, None)];
    let mut seen: BTreeSet<&Value> = BTreeSet::from([&p.root]);
    let mut components = 1;
    let mut i = 0;
    loop {
        while i < order.len() {
            let v = order[i].0;
            for &u in adj.get(v).into_iter().flatten() {
                if seen.insert(u) {
                    order.push((u, Some(i)));
                }
            }
            i += 1;
        }
        match values.iter().find(|v| !seen.contains(**v)) {
            Some(&v) => {
                seen.insert(v);
                order.push((v, Some(0)));
                components += 1;
            }
            None => break,
        }
    }
    if edges + components != values.len() {
        return None;
    }
    let n = idx.len();
    let mut nodes: Vec<TreeNode> = Vec::with_capacity(order.len());
    for &(v, parent) in &order {
        let own: Vec<&Fact> = facts.iter().filter(|f| f.args.iter().all(|a| a == v)).collect();
        let mask = (!own.is_empty()).then(|| {
            idx.values()
                .iter()
                .map(|y| {
                    own.iter().all(|f| {
                        db.contains(&Fact {
                            relation: f.relation.clone(),
                            args: vec![y.clone(); f.args.len()],
                        })
                    })
                })
                .collect()
        });
        let (mut start, mut nbr) = (vec![0; n + 1], Vec::new());
        if let Some(j) = parent {
            let u = order[j].0;
            let link: Vec<&Fact> = facts
                .iter()
                .filter(|f| f.args.contains(v) && f.args.contains(u) && f.args.iter().all(|a| a == v || a == u))
                .collect();
            if link.is_empty() {
                let me = nodes.len();
                nodes[j].children.push(me);
                nodes.push(TreeNode {
                    var: vars.iter().position(|x| x == v).expect("matcher covers every value"),
                    children: Vec::new(),
                    mask,
                    free: true,
                    start,
                    nbr,
                });
                continue;
            }
            let first = link[0];
            let bind = |args: &[Value]| -> Option<(u32, u32)> {
                let (mut x, mut y) = (None, None);
                for (pa, ta) in first.args.iter().zip(args) {
                    let slot = if pa == u { &mut x } else { &mut y };
                    if slot.is_some_and(|s| s != ta) {
                        return None;
                    }
                    *slot = Some(ta);
                }
                let (x, y) = (x?, y?);
                let ok = link.iter().all(|f| {
                    db.contains(&Fact {
                        relation: f.relation.clone(),
                        args: f.args.iter().map(|a| if a == u { x.clone() } else { y.clone() }).collect(),
                    })
                });
                ok.then(|| (idx.id(x).expect("target value"), idx.id(y).expect("target value")))
            };
            let mut pairs: Vec<(u32, u32)> = db
                .facts()
                .iter()
                .filter(|f| f.relation == first.relation)
                .filter_map(|f| bind(&f.args))
                .collect();
            pairs.sort_unstable();
            pairs.dedup();
            for &(x, _) in &pairs {
                start[x as usize + 1] += 1;
            }
            for k in 0..n {
                start[k + 1] += start[k];
            }
            nbr = pairs.iter().map(|&(_, y)| y).collect();
            let me = nodes.len();
            nodes[j].children.push(me);
        }
        nodes.push(TreeNode {
            var: vars.iter().position(|x| x == v).expect("matcher covers every value"),
            children: Vec::new(),
            mask,
            free: false,
            start,
            nbr,
        });
    }
    Some(TreePlan { nodes })
}

fn act_forward(act: &Activation<f64>, z: &Array2<f64>) -> Array2<f64> {
    match act {
        Activation::Identity => z.clone(),
        Activation::LeakyRelu(a) => {
            let a = *a;
            z.mapv(|v| if v > 0.0 { v } else { a * v })
        }
        other => z.mapv(|v| other.apply(&v)),
    }
}

fn act_backward(act: &Activation<f64>, z: &Array2<f64>, dy: &Array2<f64>) -> Result<Array2<f64>> {
    Ok(match act {
        Activation::Identity => dy.clone(),
        Activation::LeakyRelu(a) => {
            let a = *a;
            let mut d = dy.clone();
            d.zip_mut_with(z, |g, &v| {
                if v <= 0.0 {
                    *g *= a
                }
            });
            d
        }
        other => {
            let mut d = dy.clone();
            for (g, v) in d.iter_mut().zip(z.iter()) {
                *g *= other.derivative(v)?;
            }
            d
        }
    })
}

impl Engine {
    /// Compiles `net` against `db`. Every transform must have one factor.
    pub fn new(net: &Dhn<f64>, db: &Database) -> Result<Self> {
        let idx = TargetIndex::new(db);
        let n = idx.len();
        let mut e = Engine {
            params: Vec::new(),
            trainable: Vec::new(),
            tables: Vec::new(),
            trees: Vec::new(),
            layers: Vec::new(),
            head: Head::Coord(0),
            n,
            input_dim: net.input_dim(),
            values: idx.values().to_vec(),
        };
        let mut table_of: BTreeMap<String, Plan> = BTreeMap::new();
        for l in &net.layers {
            let mut queries = Vec::new();
            for q in &l.queries {
                let c = Constraints::with_free_facts(q.free_facts.clone());
                let m = Matcher::new(&q.pattern.db, Some(&q.pattern.root), q.mode, &c)?;
                let key = format!("{:?}|{:?}|{:?}|{:?}", q.pattern, q.mode, q.free_facts, m.vars());
                let plan = match table_of.get(&key) {
                    Some(&t) => t,
                    None if q.agg == Aggregation::Sum && q.mode == MatchMode::Hom && q.free_facts.is_empty() => {
                        match tree_plan(&q.pattern, m.vars(), db, &idx) {
                            Some(t) => {
                                e.trees.push(t);
                                let p = Plan::Tree(e.trees.len() - 1);
                                table_of.insert(key, p);
                                p
                            }
                            None => e.table(&m, &idx, key, &mut table_of)?,
                        }
                    }
                    None => e.table(&m, &idx, key, &mut table_of)?,
                };
                let mut transforms = Vec::new();
                for v in m.vars() {
                    let t = &q.transforms[v];
                    if t.factors.len() != 1 {
                        return Err(Error::Unsupported("training needs single-factor transforms".into()));
                    }
                    transforms.push(e.push_mlp(&t.factors[0], !q.frozen));
                }
                queries.push(QuerySpec {
                    plan,
                    transforms,
                    agg: q.agg,
                    dim: q.output_dim(),
                });
            }
            let Combine::Fnn(f) = &l.combine else {
                return Err(Error::Unsupported("training needs FNN combines".into()));
            };
            let combine = e.push_mlp(f, true);
            let norm = l.layer_norm.as_ref().map(|ln| {
                let gamma = e.push(&ln.gamma, true);
                let beta = e.push(&ln.beta, true);
                NormSpec {
                    gamma,
                    beta,
                    dim: ln.gamma.len(),
                    eps: ln.eps,
                }
            });
            e.layers.push(LayerSpec { queries, combine, norm });
        }
        e.head = match &net.classifier {
            Classifier::Threshold { coord, .. } => Head::Coord(*coord),
            Classifier::Fnn { net, .. } => Head::Mlp(e.push_mlp(net, true)),
        };
        Ok(e)
    }

    fn table(&mut self, m: &Matcher, idx: &TargetIndex, key: String, table_of: &mut BTreeMap<String, Plan>) -> Result<Plan> {
        let w = m.vars().len();
        let mut start = Vec::with_capacity(self.n + 1);
        let mut assign = Vec::new();
        for r in 0..self.n as u32 {
            start.push(assign.len() / w.max(1));
            let mut it = m.matches_at(idx, Some(r))?;
            while let Some(h) = it.next_raw() {
                assign.extend_from_slice(h);
            }
        }
        start.push(assign.len() / w.max(1));
        self.tables.push(MatchTable { width: w, start, assign });
        let p = Plan::Table(self.tables.len() - 1);
        table_of.insert(key, p);
        Ok(p)
    }

    fn push(&mut self, xs: &[f64], trainable: bool) -> usize {
        let off = self.params.len();
        self.params.extend_from_slice(xs);
        self.trainable.extend(std::iter::repeat_n(trainable, xs.len()));
        off
    }

    fn push_mlp(&mut self, f: &Fnn<f64>, trainable: bool) -> MlpSpec {
        let layers = f
            .layers
            .iter()
            .map(|d| DenseSpec {
                w: self.push(&d.weights, trainable),
                b: self.push(&d.bias, trainable),
                inputs: d.inputs,
                outputs: d.outputs,
                act: d.activation.clone(),
            })
            .collect();
        MlpSpec { layers }
    }

    pub fn num_values(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[Value] {
        &self.values
    }

    /// Total number of stored matches over all tables.
    pub fn num_matches(&self) -> usize {
        self.tables.iter().map(|t| t.start[self.n]).sum()
    }

    /// Number of queries evaluated by message passing instead of enumeration.
    pub fn num_tree_queries(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| &l.queries)
            .filter(|q| matches!(q.plan, Plan::Tree(_)))
            .count()
    }

    fn weights(&self, d: &DenseSpec) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((d.inputs, d.outputs), &self.params[d.w..d.w + d.inputs * d.outputs]).expect("shape")
    }

    fn mlp_forward(&self, m: &MlpSpec, x: Array2<f64>) -> (Array2<f64>, MlpTape) {
        let mut tape = MlpTape {
            inputs: Vec::new(),
            pre: Vec::new(),
        };
        let mut x = x;
        for d in &m.layers {
            let b = Array1::from(self.params[d.b..d.b + d.outputs].to_vec());
            let z = if d.inputs == 0 {
                Array2::zeros((x.nrows(), d.outputs)) + &b
            } else {
                x.dot(&self.weights(d)) + &b
            };
            let y = act_forward(&d.act, &z);
            tape.inputs.push(x);
            tape.pre.push(z);
            x = y;
        }
        (x, tape)
    }

    fn mlp_backward(&self, m: &MlpSpec, tape: &MlpTape, dy: Array2<f64>, grads: &mut [f64]) -> Result<Array2<f64>> {
        let mut dy = dy;
        for (k, d) in m.layers.iter().enumerate().rev() {
            let dz = act_backward(&d.act, &tape.pre[k], &dy)?;
            let x = &tape.inputs[k];
            if d.inputs > 0 {
                let dw = x.t().dot(&dz);
                for (g, v) in grads[d.w..d.w + d.inputs * d.outputs].iter_mut().zip(dw.iter()) {
                    *g += v;
                }
            }
            for (g, v) in grads[d.b..d.b + d.outputs].iter_mut().zip(dz.sum_axis(Axis(0)).iter()) {
                *g += v;
            }
            dy = if d.inputs == 0 {
                Array2::zeros((dz.nrows(), 0))
            } else {
                dz.dot(&self.weights(d).t())
            };
        }
        Ok(dy)
    }

    fn aggregate(&self, q: &QuerySpec, t: &[Array2<f64>]) -> (Array2<f64>, Option<Array2<u32>>) {
        let Plan::Table(ti) = q.plan else { unreachable!("tree plans use tree_forward") };
        let table = &self.tables[ti];
        let (d, w, n) = (q.dim, table.width, self.n);
        let ts: Vec<&[f64]> = t.iter().map(|a| a.as_slice().expect("standard layout")).collect();
        let max = q.agg == Aggregation::Max;
        let mut out = vec![0.0; n * d];
        let mut am = if max { vec![u32::MAX; n * d] } else { Vec::new() };
        let mut prod = vec![0.0; d];
        for r in 0..n {
            let (a, b) = (table.start[r], table.start[r + 1]);
            if a == b {
                continue;
            }
            let acc = &mut out[r * d..(r + 1) * d];
            for m in a..b {
                let row = table.row(m);
                prod.copy_from_slice(&ts[0][row[0] as usize * d..][..d]);
                for p in 1..w {
                    let tr = &ts[p][row[p] as usize * d..][..d];
                    prod.iter_mut().zip(tr).for_each(|(x, y)| *x *= y);
                }
                if max {
                    let arg = &mut am[r * d..(r + 1) * d];
                    for c in 0..d {
                        if m == a || prod[c] > acc[c] {
                            acc[c] = prod[c];
                            arg[c] = m as u32;
                        }
                    }
                } else {
                    acc.iter_mut().zip(&prod).for_each(|(x, y)| *x += y);
                }
            }
            if q.agg == Aggregation::Mean {
                let k = (b - a) as f64;
                acc.iter_mut().for_each(|x| *x /= k);
            }
        }
        let shape = (n, d);
        (
            Array2::from_shape_vec(shape, out).expect("shape"),
            max.then(|| Array2::from_shape_vec(shape, am).expect("shape")),
        )
    }

    fn aggregate_backward(&self, q: &QuerySpec, t: &[Array2<f64>], argmax: Option<&Array2<u32>>, da: &Array2<f64>) -> Vec<Array2<f64>> {
        let Plan::Table(ti) = q.plan else { unreachable!("tree plans use tree_backward") };
        let table = &self.tables[ti];
        let (d, w) = (q.dim, table.width);
        let ts: Vec<&[f64]> = t.iter().map(|a| a.as_slice().expect("standard layout")).collect();
        let da = da.as_standard_layout();
        let da = da.as_slice().expect("standard layout");
        let mut dt: Vec<Vec<f64>> = t.iter().map(|x| vec![0.0; x.len()]).collect();
        let mut prefix = vec![0.0; (w + 1) * d];
        let mut suffix = vec![0.0; (w + 1) * d];
        for r in 0..self.n {
            let (a, b) = (table.start[r], table.start[r + 1]);
            if a == b {
                continue;
            }
            let g = &da[r * d..(r + 1) * d];
            match argmax {
                None => {
                    let scale = if q.agg == Aggregation::Mean { 1.0 / (b - a) as f64 } else { 1.0 };
                    for m in a..b {
                        let row = table.row(m);
                        prefix[..d].iter_mut().zip(g).for_each(|(x, y)| *x = scale * y);
                        suffix[w * d..].iter_mut().for_each(|x| *x = 1.0);
                        for p in 0..w {
                            let tr = &ts[p][row[p] as usize * d..][..d];
                            let (lo, hi) = prefix.split_at_mut((p + 1) * d);
                            hi[..d].iter_mut().zip(&lo[p * d..]).zip(tr).for_each(|((x, y), z)| *x = y * z);
                        }
                        for p in (0..w).rev() {
                            let tr = &ts[p][row[p] as usize * d..][..d];
                            let (lo, hi) = suffix.split_at_mut((p + 1) * d);
                            lo[p * d..].iter_mut().zip(&hi[..d]).zip(tr).for_each(|((x, y), z)| *x = y * z);
                        }
                        for p in 0..w {
                            let dr = &mut dt[p][row[p] as usize * d..][..d];
                            let (pre, suf) = (&prefix[p * d..(p + 1) * d], &suffix[(p + 1) * d..(p + 2) * d]);
                            dr.iter_mut().zip(pre).zip(suf).for_each(|((x, y), z)| *x += y * z);
                        }
                    }
                }
                Some(am) => {
                    let am = &am.as_slice().expect("standard layout")[r * d..(r + 1) * d];
                    for c in 0..d {
                        if am[c] == u32::MAX {
                            continue;
                        }
                        let row = table.row(am[c] as usize);
                        for p in 0..w {
                            let mut rest = g[c];
                            for (p2, &tv) in row.iter().enumerate() {
                                if p2 != p {
                                    rest *= ts[p2][tv as usize * d + c];
                                }
                            }
                            dt[p][row[p] as usize * d + c] += rest;
                        }
                    }
                }
            }
        }
        dt.into_iter()
            .zip(t)
            .map(|(v, x)| Array2::from_shape_vec(x.raw_dim(), v).expect("shape"))
            .collect()
    }

    fn tree_forward(&self, plan: &TreePlan, d: usize, t: &[Array2<f64>]) -> (Array2<f64>, (Vec<Vec<f64>>, Vec<Vec<f64>>)) {
        let n = self.n;
        let k = plan.nodes.len();
        let mut sums = vec![Vec::new(); k];
        let mut msgs = vec![Vec::new(); k];
        for (c, node) in plan.nodes.iter().enumerate().rev() {
            let mut sc = t[node.var].as_slice().expect("standard layout").to_vec();
            for &ch in &node.children {
                sc.iter_mut().zip(&msgs[ch]).for_each(|(x, y): (&mut f64, &f64)| *x *= y);
            }
            if let Some(mask) = &node.mask {
                for (y, &ok) in mask.iter().enumerate() {
                    if !ok {
                        sc[y * d..(y + 1) * d].iter_mut().for_each(|x| *x = 0.0);
                    }
                }
            }
            if c > 0 && node.free {
                let mut total = vec![0.0; d];
                for y in 0..n {
                    total.iter_mut().zip(&sc[y * d..(y + 1) * d]).for_each(|(a, b)| *a += b);
                }
                msgs[c] = total.repeat(n);
            } else if c > 0 {
                let mut mc = vec![0.0; n * d];
                for x in 0..n {
                    let acc = &mut mc[x * d..(x + 1) * d];
                    for &y in &node.nbr[node.start[x]..node.start[x + 1]] {
                        acc.iter_mut().zip(&sc[y as usize * d..][..d]).for_each(|(a, b)| *a += b);
                    }
                }
                msgs[c] = mc;
            }
            sums[c] = sc;
        }
        let out = Array2::from_shape_vec((n, d), sums[0].clone()).expect("shape");
        (out, (sums, msgs))
    }

    fn tree_backward(&self, plan: &TreePlan, d: usize, t: &[Array2<f64>], tape: &(Vec<Vec<f64>>, Vec<Vec<f64>>), da: &Array2<f64>) -> Vec<Array2<f64>> {
        let n = self.n;
        let msgs = &tape.1;
        let mut dt: Vec<Vec<f64>> = t.iter().map(|x| vec![0.0; x.len()]).collect();
        let mut ds = vec![Vec::new(); plan.nodes.len()];
        ds[0] = da.as_standard_layout().as_slice().expect("standard layout").to_vec();
        for (c, node) in plan.nodes.iter().enumerate() {
            let mut g = std::mem::take(&mut ds[c]);
            if let Some(mask) = &node.mask {
                for (y, &ok) in mask.iter().enumerate() {
                    if !ok {
                        g[y * d..(y + 1) * d].iter_mut().for_each(|x| *x = 0.0);
                    }
                }
            }
            let tc = t[node.var].as_slice().expect("standard layout");
            let mut dtc = g.clone();
            for &ch in &node.children {
                dtc.iter_mut().zip(&msgs[ch]).for_each(|(x, y)| *x *= y);
            }
            dt[node.var].iter_mut().zip(&dtc).for_each(|(x, y)| *x += y);
            for &ch in &node.children {
                let mut dm = g.clone();
                dm.iter_mut().zip(tc).for_each(|(x, y)| *x *= y);
                for &other in &node.children {
                    if other != ch {
                        dm.iter_mut().zip(&msgs[other]).for_each(|(x, y)| *x *= y);
                    }
                }
                let child = &plan.nodes[ch];
                if child.free {
                    let mut total = vec![0.0; d];
                    for x in 0..n {
                        total.iter_mut().zip(&dm[x * d..(x + 1) * d]).for_each(|(a, b)| *a += b);
                    }
                    ds[ch] = total.repeat(n);
                    continue;
                }
                let mut dsc = vec![0.0; n * d];
                for x in 0..n {
                    let gx = &dm[x * d..(x + 1) * d];
                    for &y in &child.nbr[child.start[x]..child.start[x + 1]] {
                        dsc[y as usize * d..][..d].iter_mut().zip(gx).for_each(|(a, b)| *a += b);
                    }
                }
                ds[ch] = dsc;
            }
        }
        dt.into_iter()
            .zip(t)
            .map(|(v, x)| Array2::from_shape_vec(x.raw_dim(), v).expect("shape"))
            .collect()
    }

    /// Logits at every value (in index order) and the tape for [`Engine::backward`].
    pub fn forward(&self) -> (Vec<f64>, Tape) {
        let mut h = Array2::<f64>::zeros((self.n, self.input_dim));
        let mut layers = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let mut qtapes = Vec::new();
            let mut outs = Vec::new();
            for q in &l.queries {
                let mut t = Vec::new();
                let mut tapes = Vec::new();
                for m in &q.transforms {
                    let (y, tape) = self.mlp_forward(m, h.clone());
                    t.push(y.as_standard_layout().into_owned());
                    tapes.push(tape);
                }
                let (a, argmax, tree) = match q.plan {
                    Plan::Table(_) => {
                        let (a, am) = self.aggregate(q, &t);
                        (a, am, None)
                    }
                    Plan::Tree(ti) => {
                        let (a, st) = self.tree_forward(&self.trees[ti], q.dim, &t);
                        (a, None, Some(st))
                    }
                };
                outs.push(a);
                qtapes.push(QueryTape { t, tapes, argmax, tree });
            }
            let views: Vec<_> = outs.iter().map(|a| a.view()).collect();
            let x = if views.is_empty() { Array2::zeros((self.n, 0)) } else { concatenate(Axis(1), &views).expect("same rows") };
            let (mut y, ctape) = self.mlp_forward(&l.combine, x);
            let norm = l.norm.as_ref().map(|ns| {
                let mean = y.mean_axis(Axis(1)).expect("non-empty");
                let centered = &y - &mean.view().insert_axis(Axis(1));
                let var = centered.mapv(|v| v * v).mean_axis(Axis(1)).expect("non-empty");
                let inv = var.mapv(|v| 1.0 / (v + ns.eps).sqrt());
                let xhat = &centered * &inv.view().insert_axis(Axis(1));
                let gamma = Array1::from(self.params[ns.gamma..ns.gamma + ns.dim].to_vec());
                let beta = Array1::from(self.params[ns.beta..ns.beta + ns.dim].to_vec());
                y = &xhat * &gamma + &beta;
                (xhat, inv)
            });
            layers.push(LayerTape {
                input: std::mem::replace(&mut h, y),
                queries: qtapes,
                combine: ctape,
                norm,
            });
        }
        let (logits, head) = match &self.head {
            Head::Coord(c) => (h.column(*c).to_vec(), None),
            Head::Mlp(m) => {
                let (y, tape) = self.mlp_forward(m, h.clone());
                (y.column(0).to_vec(), Some(tape))
            }
        };
        (logits, Tape { layers, head, final_h: h })
    }

    /// Gradient of `Σ dlogits[i] * logit[i]` with respect to all parameters.
    /// Frozen parameters get zero gradient.
    pub fn backward(&self, tape: &Tape, dlogits: &[f64]) -> Result<Vec<f64>> {
        let mut grads = vec![0.0; self.params.len()];
        let dl = Array2::from_shape_vec((self.n, 1), dlogits.to_vec()).map_err(|e| Error::Config(e.to_string()))?;
        let mut dh = match (&self.head, &tape.head) {
            (Head::Coord(c), _) => {
                let mut d = Array2::zeros(tape.final_h.raw_dim());
                d.column_mut(*c).assign(&dl.column(0));
                d
            }
            (Head::Mlp(m), Some(t)) => self.mlp_backward(m, t, dl, &mut grads)?,
            _ => unreachable!("head tape matches head"),
        };
        for (l, lt) in self.layers.iter().zip(&tape.layers).rev() {
            if let (Some(ns), Some((xhat, inv))) = (&l.norm, &lt.norm) {
                let gamma = Array1::from(self.params[ns.gamma..ns.gamma + ns.dim].to_vec());
                for (g, v) in grads[ns.gamma..ns.gamma + ns.dim].iter_mut().zip((&dh * xhat).sum_axis(Axis(0)).iter()) {
                    *g += v;
                }
                for (g, v) in grads[ns.beta..ns.beta + ns.dim].iter_mut().zip(dh.sum_axis(Axis(0)).iter()) {
                    *g += v;
                }
                let dxhat = &dh * &gamma;
                let k = ns.dim as f64;
                let sum = dxhat.sum_axis(Axis(1)).insert_axis(Axis(1));
                let dot = (&dxhat * xhat).sum_axis(Axis(1)).insert_axis(Axis(1));
                dh = (&dxhat * k - &sum - xhat * &dot) * &inv.view().insert_axis(Axis(1)) / k;
            }
            let dx = self.mlp_backward(&l.combine, &lt.combine, dh, &mut grads)?;
            let mut din = Array2::<f64>::zeros(lt.input.raw_dim());
            let mut off = 0;
            for (q, qt) in l.queries.iter().zip(&lt.queries) {
                let da = dx.slice(s![.., off..off + q.dim]).to_owned();
                off += q.dim;
                let dt = match (q.plan, &qt.tree) {
                    (Plan::Tree(ti), Some(st)) => self.tree_backward(&self.trees[ti], q.dim, &qt.t, st, &da),
                    _ => self.aggregate_backward(q, &qt.t, qt.argmax.as_ref(), &da),
                };
                for ((m, tp), d) in q.transforms.iter().zip(&qt.tapes).zip(dt) {
                    din += &self.mlp_backward(m, tp, d, &mut grads)?;
                }
            }
            dh = din;
        }
        for (g, &t) in grads.iter_mut().zip(&self.trainable) {
            if !t {
                *g = 0.0;
            }
        }
        Ok(grads)
    }

    /// Copies the current parameters into a network of the same shape.
    pub fn export(&self, template: &Dhn<f64>) -> Result<Dhn<f64>> {
        let mut net = template.clone();
        let mut off = 0;
        let mut take = |xs: &mut Vec<f64>| {
            let n = xs.len();
            xs.copy_from_slice(&self.params[off..off + n]);
            off += n;
        };
        for l in &mut net.layers {
            for q in &mut l.queries {
                let c = Constraints::with_free_facts(q.free_facts.clone());
                let m = Matcher::new(&q.pattern.db, Some(&q.pattern.root), q.mode, &c)?;
                for v in m.vars() {
                    let t = q.transforms.get_mut(v).expect("transform per value");
                    for d in &mut t.factors[0].layers {
                        take(&mut d.weights);
                        take(&mut d.bias);
                    }
                }
            }
            if let Combine::Fnn(f) = &mut l.combine {
                for d in &mut f.layers {
                    take(&mut d.weights);
                    take(&mut d.bias);
                }
            }
            if let Some(ln) = &mut l.layer_norm {
                take(&mut ln.gamma);
                take(&mut ln.beta);
            }
        }
        if let Classifier::Fnn { net: f, .. } = &mut net.classifier {
            for d in &mut f.layers {
                take(&mut d.weights);
                take(&mut d.bias);
            }
        }
        if off != self.params.len() {
            return Err(Error::Dim {
                expected: self.params.len(),
                got: off,
            });
        }
        Ok(net)
    }
}
