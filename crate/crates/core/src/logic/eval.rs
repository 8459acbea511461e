//! Brute-force semantics. Quantified variables range over all of `adom(D)`;
//! atoms are checked as soon as their variables are bound.

use std::collections::{BTreeMap, HashMap, HashSet};

use super::{Atom, Block, Formula};
use crate::error::{Error, Result};
use crate::relational::{Database, PointedDatabase, Value};
use crate::scalar::Rational;

pub struct Evaluator<'a> {
    values: Vec<Value>,
    ids: HashMap<&'a str, u32>,
    facts: HashSet<(&'a str, Vec<u32>)>,
    memo: HashMap<(*const Formula, u32), bool>,
}

enum Check<'f> {
    Pos(&'f str, Vec<usize>),
    Neg(&'f str, Vec<usize>),
    Neq(usize, usize),
    Sub(usize, &'f Formula),
}

/// A block compiled against variable positions: `0` is the free variable.
struct Plan<'f> {
    n: usize,
    /// Checks that become decidable once position `i` is bound.
    at: Vec<Vec<Check<'f>>>,
}

impl<'f> Plan<'f> {
    fn new(b: &'f Block, sat_atoms: bool, sat_subs: bool) -> Result<Self> {
        let vars = b.all_vars();
        let pos: BTreeMap<&str, usize> = vars.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
        let lookup = |v: &str| pos.get(v).copied().ok_or_else(|| Error::Parse(format!("variable `{v}` is not in scope")));
        let idx = |a: &Atom| a.args.iter().map(|v| lookup(v)).collect::<Result<Vec<_>>>();
        let mut at: Vec<Vec<Check>> = (0..vars.len()).map(|_| Vec::new()).collect();
        let last = |p: &[usize]| p.iter().copied().max().unwrap_or(0);
        if sat_atoms {
            for a in &b.atoms {
                let p = idx(a)?;
                at[last(&p)].push(Check::Pos(&a.relation, p));
            }
        }
        for a in &b.negated {
            let p = idx(a)?;
            at[last(&p)].push(Check::Neg(&a.relation, p));
        }
        for (x, y) in &b.distinct {
            let (i, j) = (lookup(x)?, lookup(y)?);
            at[i.max(j)].push(Check::Neq(i, j));
        }
        if sat_subs {
            for (v, f) in &b.subs {
                let i = lookup(v)?;
                at[i].push(Check::Sub(i, f));
            }
        }
        Ok(Plan { n: vars.len(), at })
    }
}

impl<'a> Evaluator<'a> {
    pub fn new(db: &'a Database) -> Self {
        let values: Vec<Value> = db.adom().iter().cloned().collect();
        let ids: HashMap<&'a str, u32> = db.adom().iter().enumerate().map(|(i, v)| (v.as_str(), i as u32)).collect();
        let facts = db
            .facts()
            .iter()
            .map(|f| (f.relation.as_str(), f.args.iter().map(|a| ids[a.as_str()]).collect()))
            .collect();
        Evaluator {
            values,
            ids,
            facts,
            memo: HashMap::new(),
        }
    }

    pub fn holds_at(&mut self, f: &Formula, v: &Value) -> Result<bool> {
        let id = *self.ids.get(v.as_str()).ok_or_else(|| Error::MissingRoot(v.to_string()))?;
        self.holds(f, id)
    }

    fn holds(&mut self, f: &Formula, v: u32) -> Result<bool> {
        let key = (f as *const Formula, v);
        if let Some(&b) = self.memo.get(&key) {
            return Ok(b);
        }
        let r = match f {
            Formula::Not(g) => !self.holds(g, v)?,
            Formula::Or(a, b) => self.holds(a, v)? || self.holds(b, v)?,
            Formula::And(a, b) => self.holds(a, v)? && self.holds(b, v)?,
            Formula::Exists(b) => self.count(&Plan::new(b, true, true)?, v, 1)? >= 1,
            Formula::Count(n, b) => self.count(&Plan::new(b, true, true)?, v, *n)? >= *n,
            Formula::Graded { counts, disjuncts } => {
                let plans = disjuncts.iter().map(|d| Plan::new(d, true, true)).collect::<Result<Vec<_>>>()?;
                let mut env = vec![v];
                self.graded(counts, &plans, &mut env)?
            }
            Formula::Ratio { strict, threshold, block } => {
                let den = self.count(&Plan::new(block, true, false)?, v, u64::MAX)?;
                if den == 0 {
                    !*strict
                } else {
                    let num = self.count(&Plan::new(block, true, true)?, v, u64::MAX)?;
                    let frac = Rational::new((num as i64).into(), (den as i64).into());
                    if *strict {
                        frac > *threshold
                    } else {
                        frac >= *threshold
                    }
                }
            }
        };
        self.memo.insert(key, r);
        Ok(r)
    }

    fn check(&mut self, c: &Check, env: &[u32]) -> Result<bool> {
        Ok(match c {
            Check::Pos(r, p) => self.facts.contains(&(*r, p.iter().map(|&i| env[i]).collect())),
            Check::Neg(r, p) => !self.facts.contains(&(*r, p.iter().map(|&i| env[i]).collect())),
            Check::Neq(i, j) => env[*i] != env[*j],
            Check::Sub(i, f) => self.holds(f, env[*i])?,
        })
    }

    fn checks_pass(&mut self, plan: &Plan, level: usize, env: &[u32]) -> Result<bool> {
        for c in &plan.at[level] {
            if !self.check(c, env)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Number of satisfying assignments of the block's variables, stopping at `limit`.
    fn count(&mut self, plan: &Plan, v: u32, limit: u64) -> Result<u64> {
        let mut env = vec![v; plan.n];
        if !self.checks_pass(plan, 0, &env)? {
            return Ok(0);
        }
        let mut total = 0;
        self.count_from(plan, 1, &mut env, limit, &mut total)?;
        Ok(total)
    }

    fn count_from(&mut self, plan: &Plan, level: usize, env: &mut Vec<u32>, limit: u64, total: &mut u64) -> Result<()> {
        if level == plan.n {
            *total += 1;
            return Ok(());
        }
        for c in 0..self.values.len() as u32 {
            env[level] = c;
            if self.checks_pass(plan, level, env)? {
                self.count_from(plan, level + 1, env, limit, total)?;
                if *total >= limit {
                    return Ok(());
                }
            }
        }
        Ok(())
    }

    fn graded(&mut self, counts: &[u64], plans: &[Plan], env: &mut Vec<u32>) -> Result<bool> {
        let level = env.len() - 1;
        if level == counts.len() {
            'disjunct: for p in plans {
                for l in 0..p.n {
                    if !self.checks_pass(p, l, env)? {
                        continue 'disjunct;
                    }
                }
                return Ok(true);
            }
            return Ok(false);
        }
        let mut found = 0;
        for c in 0..self.values.len() as u32 {
            env.push(c);
            let ok = self.graded(counts, plans, env)?;
            env.pop();
            if ok {
                found += 1;
                if found >= counts[level] {
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }

    pub fn values(&self) -> &[Value] {
        &self.values
    }
}

pub fn eval(f: &Formula, pdb: &PointedDatabase) -> Result<bool> {
    Evaluator::new(&pdb.db).holds_at(f, &pdb.root)
}

/// Truth of `f` at every value of `db`.
pub fn eval_all(f: &Formula, db: &Database) -> Result<BTreeMap<Value, bool>> {
    let mut e = Evaluator::new(db);
    let mut out = BTreeMap::new();
    for (i, v) in e.values.clone().into_iter().enumerate() {
        out.insert(v, e.holds(f, i as u32)?);
    }
    Ok(out)
}
