//! Homomorphism, injective homomorphism and embedding search between databases.

mod iso;
mod lovasz;
mod partition;

pub use iso::{canonical_form, canonical_unrooted, isomorphic, CanonicalForm};
pub use lovasz::{emb_from_hom_basis, emb_from_hom_basis_free, free_expansion as lovasz_free_expansion, hom_from_emb_basis, Basis, LabeledPattern, Lovasz};
pub use partition::{partitions, quotient, set_partitions, Partition};

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relational::{Database, Fact, PointedDatabase, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    Hom,
    #[serde(alias = "inj")]
    Injective,
    #[serde(alias = "emb")]
    Embedding,
}

impl std::str::FromStr for MatchMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hom" => Ok(MatchMode::Hom),
            "inj" | "injective" => Ok(MatchMode::Injective),
            "emb" | "embedding" => Ok(MatchMode::Embedding),
            _ => Err(Error::Parse(format!("unknown match mode `{s}`"))),
        }
    }
}

pub type LabelFn<'a> = Box<dyn Fn(&Value) -> bool + Send + Sync + 'a>;

/// Side conditions on matches.
///
/// `free_facts` are pattern facts whose presence in the target is left open:
/// they are neither required (like ordinary pattern facts) nor forbidden by the
/// embedding reflection condition. An embedding query with free facts counts
/// the embeddings of every completion of the pattern at once.
#[derive(Default)]
pub struct Constraints<'a> {
    pub inequalities: BTreeSet<(Value, Value)>,
    pub labels: BTreeMap<Value, LabelFn<'a>>,
    pub free_facts: BTreeSet<Fact>,
}

impl<'a> Constraints<'a> {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn with_free_facts(free_facts: BTreeSet<Fact>) -> Self {
        Constraints {
            free_facts,
            ..Self::default()
        }
    }

    pub fn differ(mut self, a: &str, b: &str) -> Self {
        let (a, b) = (Value::new(a), Value::new(b));
        if a <= b {
            self.inequalities.insert((a, b));
        } else {
            self.inequalities.insert((b, a));
        }
        self
    }

    pub fn label(mut self, v: &str, f: impl Fn(&Value) -> bool + Send + Sync + 'a) -> Self {
        self.labels.insert(Value::new(v), Box::new(f));
        self
    }
}

impl fmt::Debug for Constraints<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Constraints")
            .field("inequalities", &self.inequalities)
            .field("labels", &self.labels.keys().collect::<Vec<_>>())
            .field("free_facts", &self.free_facts)
            .finish()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Homomorphism {
    pub mapping: BTreeMap<Value, Value>,
}

struct RelIndex {
    arity: usize,
    tuples: Vec<u32>,
    set: HashSet<Vec<u32>>,
    by_pos: Vec<HashMap<u32, Vec<u32>>>,
}

impl RelIndex {
    fn tuple(&self, i: u32) -> &[u32] {
        let a = self.arity;
        &self.tuples[i as usize * a..i as usize * a + a]
    }

    fn len(&self) -> usize {
        if self.arity == 0 {
            self.set.len()
        } else {
            self.tuples.len() / self.arity
        }
    }
}

/// Integer-indexed view of a target database with per-position fact indexes.
pub struct TargetIndex {
    values: Vec<Value>,
    ids: HashMap<Value, u32>,
    rel_ids: HashMap<String, usize>,
    rels: Vec<RelIndex>,
    incident: Vec<Vec<(u32, u32)>>,
}

impl TargetIndex {
    pub fn new(db: &Database) -> Self {
        let values: Vec<Value> = db.adom().iter().cloned().collect();
        let ids: HashMap<Value, u32> = values
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), i as u32))
            .collect();
        let mut rel_ids = HashMap::new();
        let mut rels = Vec::new();
        for (name, arity) in db.schema().relations() {
            rel_ids.insert(name.to_string(), rels.len());
            rels.push(RelIndex {
                arity,
                tuples: Vec::new(),
                set: HashSet::new(),
                by_pos: vec![HashMap::new(); arity],
            });
        }
        let mut incident = vec![Vec::new(); values.len()];
        for f in db.facts() {
            let r = rel_ids[&f.relation];
            let idx = &mut rels[r];
            let t: Vec<u32> = f.args.iter().map(|a| ids[a]).collect();
            let k = (idx.len()) as u32;
            if idx.arity > 0 {
                for (p, &v) in t.iter().enumerate() {
                    idx.by_pos[p].entry(v).or_default().push(k);
                }
                let mut seen: Vec<u32> = t.clone();
                seen.sort_unstable();
                seen.dedup();
                for v in seen {
                    incident[v as usize].push((r as u32, k));
                }
                idx.tuples.extend_from_slice(&t);
            }
            idx.set.insert(t);
        }
        TargetIndex {
            values,
            ids,
            rel_ids,
            rels,
            incident,
        }
    }

    pub fn values(&self) -> &[Value] {
        &self.values
    }

    pub fn id(&self, v: &Value) -> Option<u32> {
        self.ids.get(v).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn has(&self, rel: usize, t: &[u32]) -> bool {
        self.rels[rel].set.contains(t)
    }
}

#[derive(Clone, Debug)]
struct PFact {
    rel: String,
    args: Vec<usize>,
}

/// A compiled pattern: fixed variable order plus the checks due at each depth.
pub struct Matcher<'c> {
    vars: Vec<Value>,
    mode: MatchMode,
    rooted: bool,
    facts: Vec<PFact>,
    zero_ary: Vec<String>,
    /// Facts that become fully bound at each depth.
    check_at: Vec<Vec<usize>>,
    /// Fact used to generate candidates at each depth.
    gen: Vec<Option<usize>>,
    /// Earlier variables that must differ, per depth.
    ineq_at: Vec<Vec<usize>>,
    labels: Vec<Option<&'c LabelFn<'c>>>,
    /// Pattern facts plus free facts, keyed by relation name: exempt from reflection.
    reflect_ok: HashMap<String, HashSet<Vec<usize>>>,
    relations: BTreeSet<String>,
}

impl<'c> Matcher<'c> {
    pub fn new(
        pattern: &Database,
        root: Option<&Value>,
        mode: MatchMode,
        constraints: &'c Constraints<'c>,
    ) -> Result<Self> {
        if let Some(r) = root {
            if !pattern.has_value(r) {
                return Err(Error::MissingRoot(r.to_string()));
            }
        }
        for f in &constraints.free_facts {
            pattern.check(f)?;
            if f.args.iter().any(|a| !pattern.has_value(a)) {
                return Err(Error::Schema(format!("free fact {f:?} uses unknown values")));
            }
        }
        let values: Vec<Value> = pattern.adom().iter().cloned().collect();
        let raw: Vec<&Fact> = pattern
            .facts()
            .iter()
            .filter(|f| !constraints.free_facts.contains(*f))
            .collect();

        // Variable order: root first, then greedily the value with most facts
        // linking it to already placed values, then highest incidence.
        let incidence = |v: &Value| raw.iter().filter(|f| f.args.contains(v)).count();
        let mut order: Vec<Value> = Vec::with_capacity(values.len());
        let mut placed: BTreeSet<Value> = BTreeSet::new();
        if let Some(r) = root {
            order.push(r.clone());
            placed.insert(r.clone());
        }
        while order.len() < values.len() {
            let best = values
                .iter()
                .filter(|v| !placed.contains(*v))
                .max_by(|a, b| {
                    let link = |v: &Value| {
                        raw.iter()
                            .filter(|f| f.args.contains(v) && f.args.iter().any(|x| placed.contains(x)))
                            .count()
                    };
                    (link(a), incidence(a))
                        .cmp(&(link(b), incidence(b)))
                        .then_with(|| b.cmp(a))
                })
                .expect("unplaced value")
                .clone();
            placed.insert(best.clone());
            order.push(best);
        }
        let pos: HashMap<Value, usize> = order.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect();

        let mut facts = Vec::new();
        let mut zero_ary = Vec::new();
        for f in &raw {
            if f.args.is_empty() {
                zero_ary.push(f.relation.clone());
            } else {
                facts.push(PFact {
                    rel: f.relation.clone(),
                    args: f.args.iter().map(|a| pos[a]).collect(),
                });
            }
        }
        let n = order.len();
        let mut check_at = vec![Vec::new(); n];
        let mut gen: Vec<Option<usize>> = vec![None; n];
        for (i, f) in facts.iter().enumerate() {
            let last = *f.args.iter().max().expect("non-empty");
            check_at[last].push(i);
        }
        for d in 0..n {
            // Prefer the generator with the most bound positions.
            let mut best: Option<(usize, usize)> = None;
            for &i in &check_at[d] {
                let bound = facts[i].args.iter().filter(|&&a| a < d).count();
                if best.is_none_or(|(b, _)| bound > b) {
                    best = Some((bound, i));
                }
            }
            gen[d] = best.map(|(_, i)| i);
        }
        let mut ineq_at = vec![Vec::new(); n];
        for (a, b) in &constraints.inequalities {
            let (pa, pb) = match (pos.get(a), pos.get(b)) {
                (Some(x), Some(y)) => (*x, *y),
                _ => return Err(Error::Schema(format!("inequality on unknown values {a}, {b}"))),
            };
            if pa == pb {
                return Err(Error::Schema(format!("inequality {a} != {a}")));
            }
            ineq_at[pa.max(pb)].push(pa.min(pb));
        }
        let mut labels = vec![None; n];
        for (v, f) in &constraints.labels {
            let p = *pos
                .get(v)
                .ok_or_else(|| Error::Schema(format!("label on unknown value {v}")))?;
            labels[p] = Some(f);
        }
        let mut reflect_ok: HashMap<String, HashSet<Vec<usize>>> = HashMap::new();
        for f in pattern.facts().iter().chain(constraints.free_facts.iter()) {
            reflect_ok
                .entry(f.relation.clone())
                .or_default()
                .insert(f.args.iter().map(|a| pos[a]).collect());
        }
        let relations = pattern
            .facts()
            .iter()
            .chain(constraints.free_facts.iter())
            .map(|f| f.relation.clone())
            .collect();
        Ok(Matcher {
            vars: order,
            mode,
            rooted: root.is_some(),
            facts,
            zero_ary,
            check_at,
            gen,
            ineq_at,
            labels,
            reflect_ok,
            relations,
        })
    }

    /// Pattern values in search order; raw matches are indexed by this order.
    pub fn vars(&self) -> &[Value] {
        &self.vars
    }

    pub fn mode(&self) -> MatchMode {
        self.mode
    }

    /// Streams matches into `target`. For rooted matchers `root` must be given.
    pub fn matches<'m>(&'m self, target: &'m TargetIndex, root: Option<&Value>) -> Result<Matches<'m, 'c>> {
        let root_id = match (self.rooted, root) {
            (true, Some(r)) => Some(target.id(r).ok_or_else(|| Error::MissingRoot(r.to_string()))?),
            (true, None) => return Err(Error::MissingRoot("<none>".into())),
            (false, _) => None,
        };
        self.matches_at(target, root_id)
    }

    /// Like [`Matcher::matches`] with the root given as a target index.
    pub fn matches_at<'m>(&'m self, target: &'m TargetIndex, root: Option<u32>) -> Result<Matches<'m, 'c>> {
        let mut rel_map = HashMap::new();
        for r in &self.relations {
            let id = *target
                .rel_ids
                .get(r)
                .ok_or_else(|| Error::Schema(format!("target schema lacks `{r}`")))?;
            rel_map.insert(r.as_str(), id);
        }
        let gen_rel = self
            .gen
            .iter()
            .map(|g| g.map(|i| rel_map[self.facts[i].rel.as_str()]))
            .collect();
        let fact_rel = self.facts.iter().map(|f| rel_map[f.rel.as_str()]).collect();
        let reflect_ok: HashMap<usize, &HashSet<Vec<usize>>> = self
            .reflect_ok
            .iter()
            .map(|(r, s)| (rel_map[r.as_str()], s))
            .collect();
        let n = self.vars.len();
        let mut done = false;
        for r in &self.zero_ary {
            if !target.has(rel_map[r.as_str()], &[]) {
                done = true;
            }
        }
        if self.mode == MatchMode::Embedding {
            for (id, idx) in target.rels.iter().enumerate() {
                if idx.arity == 0
                    && !idx.set.is_empty()
                    && !reflect_ok.get(&id).is_some_and(|s| s.contains(&Vec::new()))
                {
                    done = true;
                }
            }
        }
        let mut m = Matches {
            m: self,
            t: target,
            fact_rel,
            gen_rel,
            reflect_ok,
            assign: vec![0; n],
            inv: vec![u32::MAX; if self.mode == MatchMode::Hom { 0 } else { target.len() }],
            cands: vec![Vec::new(); n],
            pos: vec![0; n],
            depth: 0,
            done,
            pending: false,
            empty_yielded: false,
            buf: Vec::new(),
        };
        if n > 0 && !m.done {
            m.cands[0] = match root {
                Some(r) => vec![r],
                None => m.candidates(0),
            };
        }
        Ok(m)
    }
}

/// Streaming match enumeration with an explicit backtracking stack.
pub struct Matches<'m, 'c> {
    m: &'m Matcher<'c>,
    t: &'m TargetIndex,
    fact_rel: Vec<usize>,
    gen_rel: Vec<Option<usize>>,
    reflect_ok: HashMap<usize, &'m HashSet<Vec<usize>>>,
    assign: Vec<u32>,
    inv: Vec<u32>,
    cands: Vec<Vec<u32>>,
    pos: Vec<usize>,
    depth: usize,
    done: bool,
    pending: bool,
    empty_yielded: bool,
    buf: Vec<u32>,
}

impl Matches<'_, '_> {
    fn candidates(&mut self, d: usize) -> Vec<u32> {
        let Some(fi) = self.m.gen[d] else {
            return (0..self.t.len() as u32).collect();
        };
        let f = &self.m.facts[fi];
        let idx = &self.t.rels[self.gen_rel[d].expect("generator relation")];
        let mut out = Vec::new();
        let bound_pos = f.args.iter().position(|&a| a < d);
        let mut accept = |tuple: &[u32]| {
            let mut x = None;
            for (p, &a) in f.args.iter().enumerate() {
                if a < d {
                    if tuple[p] != self.assign[a] {
                        return;
                    }
                } else {
                    match x {
                        None => x = Some(tuple[p]),
                        Some(y) if y != tuple[p] => return,
                        _ => {}
                    }
                }
            }
            out.push(x.expect("generator mentions the variable"));
        };
        match bound_pos {
            Some(p) => {
                if let Some(list) = idx.by_pos[p].get(&self.assign[f.args[p]]) {
                    for &k in list {
                        accept(idx.tuple(k));
                    }
                }
            }
            None => {
                for k in 0..idx.len() as u32 {
                    accept(idx.tuple(k));
                }
            }
        }
        out
    }

    fn try_bind(&mut self, d: usize, t: u32) -> bool {
        let m = self.m;
        if m.mode != MatchMode::Hom && self.inv[t as usize] != u32::MAX {
            return false;
        }
        for &e in &m.ineq_at[d] {
            if self.assign[e] == t {
                return false;
            }
        }
        if let Some(f) = m.labels[d] {
            if !f(&self.t.values[t as usize]) {
                return false;
            }
        }
        self.assign[d] = t;
        for &fi in &m.check_at[d] {
            if d > 0 && Some(fi) == m.gen[d] {
                continue;
            }
            self.buf.clear();
            for &a in &m.facts[fi].args {
                self.buf.push(self.assign[a]);
            }
            if !self.t.has(self.fact_rel[fi], &self.buf) {
                return false;
            }
        }
        if m.mode != MatchMode::Hom {
            self.inv[t as usize] = d as u32;
        }
        if m.mode == MatchMode::Embedding && !self.reflects(t) {
            self.inv[t as usize] = u32::MAX;
            return false;
        }
        true
    }

    /// Every target fact over the image that involves `t` must come from the pattern.
    fn reflects(&self, t: u32) -> bool {
        let mut vars = Vec::new();
        for &(r, k) in &self.t.incident[t as usize] {
            let tuple = self.t.rels[r as usize].tuple(k);
            vars.clear();
            let mut inside = true;
            for &x in tuple {
                let v = self.inv[x as usize];
                if v == u32::MAX {
                    inside = false;
                    break;
                }
                vars.push(v as usize);
            }
            if inside && !self.reflect_ok.get(&(r as usize)).is_some_and(|s| s.contains(&vars)) {
                return false;
            }
        }
        true
    }

    fn unbind(&mut self, d: usize) {
        if self.m.mode != MatchMode::Hom {
            self.inv[self.assign[d] as usize] = u32::MAX;
        }
    }

    /// Next match as target indices in [`Matcher::vars`] order, without allocating.
    pub fn next_raw(&mut self) -> Option<&[u32]> {
        if self.done {
            return None;
        }
        let n = self.m.vars.len();
        if n == 0 {
            self.done = true;
            return if self.empty_yielded { None } else { Some(&[]) };
        }
        if self.pending {
            self.pending = false;
            self.unbind(n - 1);
        }
        loop {
            let d = self.depth;
            if self.pos[d] >= self.cands[d].len() {
                if d == 0 {
                    self.done = true;
                    return None;
                }
                self.depth -= 1;
                self.unbind(d - 1);
                continue;
            }
            let t = self.cands[d][self.pos[d]];
            self.pos[d] += 1;
            if !self.try_bind(d, t) {
                continue;
            }
            if d + 1 == n {
                self.pending = true;
                return Some(&self.assign);
            }
            self.depth = d + 1;
            self.cands[d + 1] = self.candidates(d + 1);
            self.pos[d + 1] = 0;
        }
    }

    pub fn count(mut self) -> u64 {
        let mut c = 0;
        while self.next_raw().is_some() {
            c += 1;
        }
        c
    }
}

impl Iterator for Matches<'_, '_> {
    type Item = Homomorphism;
    fn next(&mut self) -> Option<Homomorphism> {
        let vars = self.m.vars.clone();
        let raw = self.next_raw()?.to_vec();
        Some(Homomorphism {
            mapping: vars
                .into_iter()
                .zip(raw)
                .map(|(v, t)| (v, self.t.values[t as usize].clone()))
                .collect(),
        })
    }
}

fn check_schemas(f: &Database, d: &Database) -> Result<()> {
    if !f.schema().is_subschema_of(d.schema()) {
        return Err(Error::Schema("pattern schema is not part of the target schema".into()));
    }
    Ok(())
}

/// All matches of `f` into `d` satisfying the mode and constraints.
pub fn enumerate(
    f: &PointedDatabase,
    d: &PointedDatabase,
    mode: MatchMode,
    constraints: &Constraints,
) -> Result<Vec<Homomorphism>> {
    check_schemas(&f.db, &d.db)?;
    let m = Matcher::new(&f.db, Some(&f.root), mode, constraints)?;
    let t = TargetIndex::new(&d.db);
    Ok(m.matches(&t, Some(&d.root))?.collect())
}

pub fn count(f: &PointedDatabase, d: &PointedDatabase, mode: MatchMode, constraints: &Constraints) -> Result<u64> {
    check_schemas(&f.db, &d.db)?;
    let m = Matcher::new(&f.db, Some(&f.root), mode, constraints)?;
    let t = TargetIndex::new(&d.db);
    Ok(m.matches(&t, Some(&d.root))?.count())
}

pub fn count_unrooted(f: &Database, d: &Database, mode: MatchMode, constraints: &Constraints) -> Result<u64> {
    check_schemas(f, d)?;
    let m = Matcher::new(f, None, mode, constraints)?;
    let t = TargetIndex::new(d);
    Ok(m.matches(&t, None)?.count())
}

/// Rooted counts of `f` at every value of `d`, in `adom` order.
pub fn count_all_roots(f: &PointedDatabase, d: &Database, mode: MatchMode, constraints: &Constraints) -> Result<Vec<(Value, u64)>> {
    check_schemas(&f.db, d)?;
    let m = Matcher::new(&f.db, Some(&f.root), mode, constraints)?;
    let t = TargetIndex::new(d);
    (0..t.len() as u32)
        .map(|r| Ok((t.values[r as usize].clone(), m.matches_at(&t, Some(r))?.count())))
        .collect()
}
