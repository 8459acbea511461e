//! Modal logics over relational databases: HML, GHML, GHML⁻, EML and RHML.
//!
//! Every formula is unary. Quantifier blocks name their free variable
//! explicitly; a unary subformula used inside a block is attached to one of
//! the block's variables and has that variable as its own free variable.

mod catalog;
mod eval;
mod sexp;
mod strict;

pub use catalog::{builtin_formulas, local_transitivity, phi_sun, triangle_loops};
pub use eval::{eval, eval_all, Evaluator};
pub use sexp::parse;
pub use strict::{expand_any, is_strict, strictify};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::relational::Schema;
use crate::scalar::Rational;

pub type Var = String;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub relation: String,
    pub args: Vec<Var>,
}

impl Atom {
    pub fn new(relation: &str, args: &[&str]) -> Self {
        Atom {
            relation: relation.to_string(),
            args: args.iter().map(|a| a.to_string()).collect(),
        }
    }

    fn rename(&self, map: &BTreeMap<Var, Var>) -> Atom {
        Atom {
            relation: self.relation.clone(),
            args: self.args.iter().map(|a| map.get(a).unwrap_or(a).clone()).collect(),
        }
    }
}

/// A quantifier block `∃ vars (atoms ∧ ¬negated ∧ distinct ∧ subs)` with free
/// variable `free`. `any` lists atoms whose truth the block leaves open; they
/// never constrain satisfaction and only matter when the block is turned into
/// a query pattern.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Block {
    pub free: Var,
    pub vars: Vec<Var>,
    pub atoms: Vec<Atom>,
    pub negated: Vec<Atom>,
    pub distinct: Vec<(Var, Var)>,
    pub any: Vec<Atom>,
    pub subs: Vec<(Var, Formula)>,
}

impl Block {
    pub fn new(free: &str, vars: &[&str]) -> Self {
        Block {
            free: free.to_string(),
            vars: vars.iter().map(|v| v.to_string()).collect(),
            ..Block::default()
        }
    }

    pub fn atom(mut self, relation: &str, args: &[&str]) -> Self {
        self.atoms.push(Atom::new(relation, args));
        self
    }

    pub fn not_atom(mut self, relation: &str, args: &[&str]) -> Self {
        self.negated.push(Atom::new(relation, args));
        self
    }

    pub fn neq(mut self, a: &str, b: &str) -> Self {
        self.distinct.push((a.to_string(), b.to_string()));
        self
    }

    /// Attaches `f` to `var`; conjunctions are split into separate conjuncts.
    pub fn sub(mut self, var: &str, f: Formula) -> Self {
        match f {
            Formula::And(a, b) => self.sub(var, *a).sub(var, *b),
            f => {
                self.subs.push((var.to_string(), f.with_free(var)));
                self
            }
        }
    }

    /// `free` followed by the quantified variables.
    pub fn all_vars(&self) -> Vec<Var> {
        std::iter::once(self.free.clone()).chain(self.vars.iter().cloned()).collect()
    }

    fn is_plain(&self) -> bool {
        self.negated.is_empty() && self.distinct.is_empty() && self.any.is_empty()
    }

    /// Gaifman connectivity of the positive atoms, which must mention every
    /// variable and the free one in particular.
    fn is_connected(&self) -> bool {
        let vars = self.all_vars();
        let mut adj: BTreeMap<&str, BTreeSet<&str>> = vars.iter().map(|v| (v.as_str(), BTreeSet::new())).collect();
        let mut used = BTreeSet::new();
        for a in &self.atoms {
            for x in &a.args {
                used.insert(x.as_str());
                for y in &a.args {
                    if x != y {
                        adj.entry(x).or_default().insert(y);
                    }
                }
            }
        }
        if vars.iter().any(|v| !used.contains(v.as_str())) {
            return false;
        }
        let mut seen = BTreeSet::from([self.free.as_str()]);
        let mut stack = vec![self.free.as_str()];
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if seen.insert(w) {
                    stack.push(w);
                }
            }
        }
        seen.len() == adj.len()
    }

    fn rename_free(&self, new: &str) -> Block {
        if self.free == new {
            return self.clone();
        }
        let mut b = self.clone();
        // Avoid capturing `new` by a bound variable of the same name.
        if b.vars.iter().any(|v| v == new) {
            let taken: BTreeSet<Var> = b.all_vars().into_iter().chain([new.to_string()]).collect();
            let mut fresh = format!("{new}'");
            while taken.contains(&fresh) {
                fresh.push('\'');
            }
            b = b.rename_vars(&BTreeMap::from([(new.to_string(), fresh)]));
        }
        let map = BTreeMap::from([(b.free.clone(), new.to_string())]);
        let mut b = b.rename_vars(&map);
        b.free = new.to_string();
        b
    }

    /// Renames variables of this block (free or bound) without capture checks.
    pub(crate) fn rename_vars(&self, map: &BTreeMap<Var, Var>) -> Block {
        let r = |v: &Var| map.get(v).unwrap_or(v).clone();
        Block {
            free: r(&self.free),
            vars: self.vars.iter().map(r).collect(),
            atoms: self.atoms.iter().map(|a| a.rename(map)).collect(),
            negated: self.negated.iter().map(|a| a.rename(map)).collect(),
            distinct: self.distinct.iter().map(|(a, b)| (r(a), r(b))).collect(),
            any: self.any.iter().map(|a| a.rename(map)).collect(),
            subs: self.subs.iter().map(|(v, f)| (r(v), f.with_free(&r(v)))).collect(),
        }
    }

    fn validate(&self, schema: Option<&Schema>) -> Result<()> {
        let scope: BTreeSet<&str> = std::iter::once(self.free.as_str()).chain(self.vars.iter().map(String::as_str)).collect();
        if scope.len() != self.vars.len() + 1 {
            return Err(Error::Parse(format!("repeated variable in block over `{}`", self.free)));
        }
        let in_scope = |v: &str| {
            if scope.contains(v) {
                Ok(())
            } else {
                Err(Error::Parse(format!("variable `{v}` is not in scope")))
            }
        };
        for a in self.atoms.iter().chain(&self.negated).chain(&self.any) {
            for v in &a.args {
                in_scope(v)?;
            }
            if let Some(s) = schema {
                match s.arity(&a.relation) {
                    None => return Err(Error::UnknownRelation(a.relation.clone())),
                    Some(n) if n != a.args.len() => {
                        return Err(Error::Arity {
                            relation: a.relation.clone(),
                            expected: n,
                            got: a.args.len(),
                        })
                    }
                    _ => {}
                }
            }
        }
        for (a, b) in &self.distinct {
            in_scope(a)?;
            in_scope(b)?;
        }
        for (v, f) in &self.subs {
            in_scope(v)?;
            if f.free_var() != v {
                return Err(Error::Parse(format!("subformula attached to `{v}` has free variable `{}`", f.free_var())));
            }
            f.validate_with(schema)?;
        }
        Ok(())
    }

    fn relation_arities(&self, out: &mut BTreeMap<String, usize>) {
        for a in self.atoms.iter().chain(&self.negated).chain(&self.any) {
            out.insert(a.relation.clone(), a.args.len());
        }
        for (_, f) in &self.subs {
            f.relation_arities(out);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Formula {
    Not(Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    /// `∃ȳ ψ`: an HML block, or an EML block when it has negated atoms,
    /// inequalities or open atoms.
    Exists(Block),
    /// GHML⁻: `∃^{≥n} ȳ ψ`, counting tuples.
    Count(u64, Block),
    /// GHML: `∃^{≥k₁} y₁ ⋯ ∃^{≥k_m} y_m ⋁ᵢ ψᵢ`. Every disjunct has the same
    /// free variable and variable list; `counts[i]` grades `vars[i]`.
    Graded { counts: Vec<u64>, disjuncts: Vec<Block> },
    /// RHML: `∃_{≥t} ȳ (μ, ν)` (or `>` when strict); `block.atoms` is ν and
    /// `block.subs` is μ.
    Ratio { strict: bool, threshold: Rational, block: Block },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fragment {
    Hml,
    GhmlMinus,
    Ghml,
    Eml,
    Rhml,
}

impl fmt::Display for Fragment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fragment::Hml => "HML",
            Fragment::GhmlMinus => "GHML⁻",
            Fragment::Ghml => "GHML",
            Fragment::Eml => "EML",
            Fragment::Rhml => "RHML",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FormulaClass {
    pub connected: bool,
    /// Nesting depth of quantifier blocks.
    pub depth: usize,
    /// Largest number of variables in one block, free variable included.
    pub width: usize,
    /// Largest counting bound; 1 when there is no counting.
    pub counting_bound: u64,
}

impl Formula {
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn exists(b: Block) -> Formula {
        Formula::Exists(b)
    }

    /// `R(z̄)` over a single variable, as a block without quantified variables.
    pub fn atom(relation: &str, args: &[&str]) -> Formula {
        let free = args.first().copied().unwrap_or("x");
        Formula::Exists(Block::new(free, &[]).atom(relation, args))
    }

    pub fn truth(free: &str) -> Formula {
        Formula::Exists(Block::new(free, &[]))
    }

    pub fn falsity(free: &str) -> Formula {
        Formula::not(Formula::truth(free))
    }

    pub fn free_var(&self) -> &str {
        match self {
            Formula::Not(f) => f.free_var(),
            Formula::Or(a, _) | Formula::And(a, _) => a.free_var(),
            Formula::Exists(b) | Formula::Count(_, b) | Formula::Ratio { block: b, .. } => &b.free,
            Formula::Graded { disjuncts, .. } => disjuncts.first().map_or("x", |b| &b.free),
        }
    }

    /// The same formula with its free variable renamed.
    pub fn with_free(&self, new: &str) -> Formula {
        match self {
            Formula::Not(f) => Formula::not(f.with_free(new)),
            Formula::Or(a, b) => Formula::or(a.with_free(new), b.with_free(new)),
            Formula::And(a, b) => Formula::and(a.with_free(new), b.with_free(new)),
            Formula::Exists(b) => Formula::Exists(b.rename_free(new)),
            Formula::Count(n, b) => Formula::Count(*n, b.rename_free(new)),
            Formula::Graded { counts, disjuncts } => {
                // Disjuncts share their variables, so rename them consistently.
                let first = disjuncts.first().map(|b| b.rename_free(new));
                let map: BTreeMap<Var, Var> = match (&first, disjuncts.first()) {
                    (Some(nb), Some(ob)) => ob.all_vars().into_iter().zip(nb.all_vars()).collect(),
                    _ => BTreeMap::new(),
                };
                Formula::Graded {
                    counts: counts.clone(),
                    disjuncts: disjuncts.iter().map(|b| b.rename_vars(&map)).collect(),
                }
            }
            Formula::Ratio { strict, threshold, block } => Formula::Ratio {
                strict: *strict,
                threshold: threshold.clone(),
                block: block.rename_free(new),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with(None)
    }

    /// Scoping, free-variable and (optionally) schema checks.
    pub fn validate_with(&self, schema: Option<&Schema>) -> Result<()> {
        match self {
            Formula::Not(f) => f.validate_with(schema),
            Formula::Or(a, b) | Formula::And(a, b) => {
                if a.free_var() != b.free_var() {
                    return Err(Error::Parse(format!(
                        "connectives join formulas over `{}` and `{}`",
                        a.free_var(),
                        b.free_var()
                    )));
                }
                a.validate_with(schema)?;
                b.validate_with(schema)
            }
            Formula::Exists(b) => b.validate(schema),
            Formula::Count(n, b) => {
                if *n == 0 {
                    return Err(Error::Parse("counting bound must be at least 1".into()));
                }
                if !b.is_plain() {
                    return Err(Error::Parse("counting blocks take atoms and subformulas only".into()));
                }
                b.validate(schema)
            }
            Formula::Graded { counts, disjuncts } => {
                let first = disjuncts
                    .first()
                    .ok_or_else(|| Error::Parse("graded block needs a disjunct".into()))?;
                if counts.len() != first.vars.len() || counts.contains(&0) {
                    return Err(Error::Parse("one positive count per graded variable".into()));
                }
                for d in disjuncts {
                    if d.free != first.free || d.vars != first.vars || !d.is_plain() {
                        return Err(Error::Parse("graded disjuncts must share variables".into()));
                    }
                    d.validate(schema)?;
                }
                Ok(())
            }
            Formula::Ratio { block, .. } => {
                if !block.is_plain() {
                    return Err(Error::Parse("ratio blocks take atoms and subformulas only".into()));
                }
                block.validate(schema)
            }
        }
    }

    /// Relations used by the formula, with their arities.
    pub fn schema(&self) -> Schema {
        let mut m = BTreeMap::new();
        self.relation_arities(&mut m);
        m.into_iter().fold(Schema::new(), |s, (r, a)| s.with(&r, a))
    }

    fn relation_arities(&self, out: &mut BTreeMap<String, usize>) {
        match self {
            Formula::Not(f) => f.relation_arities(out),
            Formula::Or(a, b) | Formula::And(a, b) => {
                a.relation_arities(out);
                b.relation_arities(out);
            }
            Formula::Exists(b) | Formula::Count(_, b) | Formula::Ratio { block: b, .. } => b.relation_arities(out),
            Formula::Graded { disjuncts, .. } => disjuncts.iter().for_each(|b| b.relation_arities(out)),
        }
    }

    /// Immediate subformulas.
    pub fn children(&self) -> Vec<&Formula> {
        match self {
            Formula::Not(f) => vec![f],
            Formula::Or(a, b) | Formula::And(a, b) => vec![a, b],
            Formula::Exists(b) | Formula::Count(_, b) | Formula::Ratio { block: b, .. } => b.subs.iter().map(|(_, f)| f).collect(),
            Formula::Graded { disjuncts, .. } => disjuncts.iter().flat_map(|b| b.subs.iter().map(|(_, f)| f)).collect(),
        }
    }

    fn all(&self, p: &dyn Fn(&Formula) -> bool) -> bool {
        p(self) && self.children().into_iter().all(|c| c.all(p))
    }

    pub fn is_hml(&self) -> bool {
        self.all(&|f| matches!(f, Formula::Not(_) | Formula::Or(..) | Formula::And(..)) || matches!(f, Formula::Exists(b) if b.is_plain()))
    }

    pub fn is_ghml_minus(&self) -> bool {
        self.all(&|f| matches!(f, Formula::Not(_) | Formula::Or(..) | Formula::And(..) | Formula::Count(..)) || matches!(f, Formula::Exists(b) if b.is_plain()))
    }

    pub fn is_ghml(&self) -> bool {
        self.all(&|f| matches!(f, Formula::Not(_) | Formula::Or(..) | Formula::And(..) | Formula::Graded { .. }) || matches!(f, Formula::Exists(b) if b.is_plain()))
    }

    pub fn is_eml(&self) -> bool {
        self.all(&|f| matches!(f, Formula::Not(_) | Formula::Or(..) | Formula::And(..) | Formula::Exists(_)))
    }

    /// Ratio quantifiers plus plain existential blocks, which are read as
    /// `∃_{>0} ȳ (μ, ν)`.
    pub fn is_rhml(&self) -> bool {
        self.all(&|f| matches!(f, Formula::Not(_) | Formula::Or(..) | Formula::And(..) | Formula::Ratio { .. }) || matches!(f, Formula::Exists(b) if b.is_plain()))
    }

    /// Smallest fragment containing the formula.
    pub fn fragment(&self) -> Option<Fragment> {
        if self.is_hml() {
            Some(Fragment::Hml)
        } else if self.is_ghml_minus() {
            Some(Fragment::GhmlMinus)
        } else if self.is_eml() {
            Some(Fragment::Eml)
        } else if self.is_rhml() {
            Some(Fragment::Rhml)
        } else if self.is_ghml() {
            Some(Fragment::Ghml)
        } else {
            None
        }
    }

    pub fn classify(&self) -> FormulaClass {
        let child = self.children().into_iter().map(Formula::classify).fold(
            FormulaClass {
                connected: true,
                depth: 0,
                width: 1,
                counting_bound: 1,
            },
            |a, c| FormulaClass {
                connected: a.connected && c.connected,
                depth: a.depth.max(c.depth),
                width: a.width.max(c.width),
                counting_bound: a.counting_bound.max(c.counting_bound),
            },
        );
        let blocks: Vec<&Block> = match self {
            Formula::Exists(b) | Formula::Count(_, b) | Formula::Ratio { block: b, .. } => vec![b],
            Formula::Graded { disjuncts, .. } => disjuncts.iter().collect(),
            _ => return child,
        };
        let bound = match self {
            Formula::Count(n, _) => *n,
            Formula::Graded { counts, .. } => counts.iter().copied().max().unwrap_or(1),
            _ => 1,
        };
        FormulaClass {
            connected: child.connected && blocks.iter().all(|b| b.is_connected()),
            depth: child.depth + 1,
            width: child.width.max(blocks[0].vars.len() + 1),
            counting_bound: child.counting_bound.max(bound),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&sexp::print(self))
    }
}

impl std::str::FromStr for Formula {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse(s)
    }
}

#[cfg(test)]
mod tests;
