//! Strict form for EML: every block fixes equality between its variables and
//! decides each atom over them, so it describes one embedding pattern.
//!
//! Atoms that the original block does not mention are left open (`any`)
//! instead of being split into a positive and a negative copy; an open atom
//! behaves like the disjunction of both choices without the blowup.
//! [`expand_any`] performs the split when the fully decided form is needed.

use std::collections::{BTreeMap, BTreeSet};

use super::{Atom, Block, Formula, Var};
use crate::error::{Error, Result};
use crate::hom::set_partitions;
use crate::relational::Schema;

fn all_atoms(schema: &Schema, vars: &[Var]) -> Vec<Atom> {
    let mut out = Vec::new();
    for (rel, arity) in schema.relations() {
        if vars.is_empty() && arity > 0 {
            continue;
        }
        let n = vars.len();
        for mut code in 0..n.pow(arity as u32) {
            let mut args = Vec::with_capacity(arity);
            for _ in 0..arity {
                args.push(vars[code % n].clone());
                code /= n;
            }
            args.reverse();
            out.push(Atom {
                relation: rel.to_string(),
                args,
            });
        }
    }
    out
}

fn disjunction(parts: Vec<Formula>, free: &str) -> Formula {
    let mut it = parts.into_iter();
    match it.next() {
        None => Formula::falsity(free),
        Some(first) => it.fold(first, Formula::or),
    }
}

fn strict_block(b: &Block, schema: &Schema) -> Result<Formula> {
    let subs: Vec<(Var, Formula)> = b
        .subs
        .iter()
        .map(|(v, f)| Ok((v.clone(), strictify(f, schema)?)))
        .collect::<Result<_>>()?;
    let vars = b.all_vars();
    let mut out = Vec::new();
    for rgs in set_partitions(vars.len()) {
        // Representative of each class: the free variable for its own class,
        // otherwise the first member.
        let mut rep_of_class: BTreeMap<usize, Var> = BTreeMap::new();
        for (i, &c) in rgs.iter().enumerate() {
            rep_of_class.entry(c).or_insert_with(|| vars[i].clone());
        }
        let map: BTreeMap<Var, Var> = vars.iter().zip(&rgs).map(|(v, c)| (v.clone(), rep_of_class[c].clone())).collect();
        if b.distinct.iter().any(|(x, y)| map[x] == map[y]) {
            continue;
        }
        let pos: BTreeSet<Atom> = b.atoms.iter().map(|a| a.rename(&map)).collect();
        let neg: BTreeSet<Atom> = b.negated.iter().map(|a| a.rename(&map)).collect();
        if pos.intersection(&neg).next().is_some() {
            continue;
        }
        let reps: Vec<Var> = rep_of_class.values().cloned().collect();
        let mut nb = Block {
            free: b.free.clone(),
            vars: reps[1..].to_vec(),
            ..Block::default()
        };
        for a in all_atoms(schema, &reps) {
            if pos.contains(&a) {
                nb.atoms.push(a);
            } else if neg.contains(&a) {
                nb.negated.push(a);
            } else {
                nb.any.push(a);
            }
        }
        for (i, x) in reps.iter().enumerate() {
            for y in &reps[i + 1..] {
                nb.distinct.push((x.clone(), y.clone()));
            }
        }
        nb.subs = subs.iter().map(|(v, f)| (map[v].clone(), f.with_free(&map[v]))).collect();
        out.push(Formula::Exists(nb));
    }
    if out.is_empty() {
        // The block is unsatisfiable; use a strict falsity.
        let any = all_atoms(schema, std::slice::from_ref(&b.free));
        return Ok(Formula::not(Formula::Exists(Block {
            free: b.free.clone(),
            any,
            ..Block::default()
        })));
    }
    Ok(disjunction(out, &b.free))
}

/// Equivalent EML formula in strict form over `schema` (with open atoms).
pub fn strictify(f: &Formula, schema: &Schema) -> Result<Formula> {
    f.validate_with(Some(schema))?;
    Ok(match f {
        Formula::Not(g) => Formula::not(strictify(g, schema)?),
        Formula::Or(a, b) => Formula::or(strictify(a, schema)?, strictify(b, schema)?),
        Formula::And(a, b) => Formula::and(strictify(a, schema)?, strictify(b, schema)?),
        Formula::Exists(b) => strict_block(b, schema)?,
        _ => return Err(Error::Unsupported("strict form is defined for EML formulas".into())),
    })
}

fn block_is_strict(b: &Block, schema: &Schema) -> bool {
    let vars = b.all_vars();
    let pairs: BTreeSet<(Var, Var)> = b
        .distinct
        .iter()
        .flat_map(|(x, y)| [(x.clone(), y.clone()), (y.clone(), x.clone())])
        .collect();
    let all_pairs = vars.iter().enumerate().all(|(i, x)| vars[i + 1..].iter().all(|y| pairs.contains(&(x.clone(), y.clone()))));
    let decided: Vec<&Atom> = b.atoms.iter().chain(&b.negated).chain(&b.any).collect();
    let unique: BTreeSet<&Atom> = decided.iter().copied().collect();
    all_pairs
        && unique.len() == decided.len()
        && all_atoms(schema, &vars).iter().all(|a| unique.contains(a))
        && b.subs.iter().all(|(_, f)| is_strict(f, schema))
}

/// Whether `f` is an EML formula in strict form over `schema`. Open atoms
/// count as decided.
pub fn is_strict(f: &Formula, schema: &Schema) -> bool {
    match f {
        Formula::Not(g) => is_strict(g, schema),
        Formula::Or(a, b) | Formula::And(a, b) => is_strict(a, schema) && is_strict(b, schema),
        Formula::Exists(b) => block_is_strict(b, schema),
        _ => false,
    }
}

/// Replaces every block with open atoms by the disjunction over all ways of
/// deciding them. Exponential in the number of open atoms.
pub fn expand_any(f: &Formula) -> Formula {
    match f {
        Formula::Not(g) => Formula::not(expand_any(g)),
        Formula::Or(a, b) => Formula::or(expand_any(a), expand_any(b)),
        Formula::And(a, b) => Formula::and(expand_any(a), expand_any(b)),
        Formula::Exists(b) => {
            let subs: Vec<(Var, Formula)> = b.subs.iter().map(|(v, g)| (v.clone(), expand_any(g))).collect();
            let n = b.any.len();
            let parts = (0..1u64 << n)
                .map(|mask| {
                    let mut nb = Block {
                        any: Vec::new(),
                        subs: subs.clone(),
                        ..b.clone()
                    };
                    for (i, a) in b.any.iter().enumerate() {
                        if mask >> i & 1 == 1 {
                            nb.atoms.push(a.clone());
                        } else {
                            nb.negated.push(a.clone());
                        }
                    }
                    Formula::Exists(nb)
                })
                .collect();
            disjunction(parts, &b.free)
        }
        other => other.clone(),
    }
}
