//! S-expression surface syntax.
//!
//! ```text
//! (exists (y) (E x y) (not (exists (z) (E y z))))   ; HML
//! (exists>= 2 (y) (E x y))                          ; GHML⁻
//! (ghml ((y 2) (z 1)) (and (E x y) (E y z)))        ; GHML, one (and ...) per disjunct
//! (exists (y) (E x y) (not (E y x)) (!= x y))       ; EML
//! (exists (y) (E x y) (any (E y y)))                ; open atoms
//! (ratio>= 1/2 (y z) (mu (E y y)) (nu (E x y) (E y z)))
//! ```
//!
//! Inside a block body `(not (R ...))` is a negated atom; wrap it as
//! `(not (exists () (R ...)))` for a negated subformula. Free variables of
//! subformulas are inferred from the variables they mention.

use std::collections::BTreeSet;

use super::{Atom, Block, Formula, Var};
use crate::error::{Error, Result};
use crate::scalar::parse_rational;

#[derive(Clone, Debug, PartialEq)]
enum Sexp {
    Sym(String),
    List(Vec<Sexp>),
}

fn read(src: &str) -> Result<Sexp> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    for line in src.lines() {
        let line = line.split(';').next().unwrap_or("");
        for c in line.chars() {
            match c {
                '(' | ')' => {
                    if !cur.is_empty() {
                        tokens.push(std::mem::take(&mut cur));
                    }
                    tokens.push(c.to_string());
                }
                c if c.is_whitespace() => {
                    if !cur.is_empty() {
                        tokens.push(std::mem::take(&mut cur));
                    }
                }
                c => cur.push(c),
            }
        }
        if !cur.is_empty() {
            tokens.push(std::mem::take(&mut cur));
        }
    }
    let mut pos = 0;
    let e = read_at(&tokens, &mut pos)?;
    if pos != tokens.len() {
        return Err(Error::Parse(format!("trailing input after `{}`", tokens[pos - 1])));
    }
    Ok(e)
}

fn read_at(tokens: &[String], pos: &mut usize) -> Result<Sexp> {
    let t = tokens.get(*pos).ok_or_else(|| Error::Parse("unexpected end of input".into()))?;
    *pos += 1;
    match t.as_str() {
        "(" => {
            let mut items = Vec::new();
            loop {
                match tokens.get(*pos).map(String::as_str) {
                    None => return Err(Error::Parse("unbalanced `(`".into())),
                    Some(")") => {
                        *pos += 1;
                        return Ok(Sexp::List(items));
                    }
                    Some(_) => items.push(read_at(tokens, pos)?),
                }
            }
        }
        ")" => Err(Error::Parse("unbalanced `)`".into())),
        s => Ok(Sexp::Sym(s.to_string())),
    }
}

const KEYWORDS: [&str; 12] = [
    "not", "or", "and", "exists", "exists>=", "ghml", "ratio>=", "ratio>", "any", "!=", "mu", "nu",
];

fn sym(e: &Sexp) -> Option<&str> {
    match e {
        Sexp::Sym(s) => Some(s),
        Sexp::List(_) => None,
    }
}

fn relational(e: &Sexp) -> Option<Atom> {
    let Sexp::List(items) = e else { return None };
    let head = sym(items.first()?)?;
    if KEYWORDS.contains(&head) {
        return None;
    }
    let args = items[1..].iter().map(|a| sym(a).map(str::to_string)).collect::<Option<Vec<_>>>()?;
    Some(Atom {
        relation: head.to_string(),
        args,
    })
}

fn var_list(e: &Sexp) -> Result<Vec<Var>> {
    match e {
        Sexp::List(items) => items
            .iter()
            .map(|v| sym(v).map(str::to_string).ok_or_else(|| Error::Parse("variable list holds symbols only".into())))
            .collect(),
        Sexp::Sym(s) => Err(Error::Parse(format!("expected a variable list, found `{s}`"))),
    }
}

fn list(e: &Sexp) -> Result<&[Sexp]> {
    match e {
        Sexp::List(items) => Ok(items),
        Sexp::Sym(s) => Err(Error::Parse(format!("expected a list, found `{s}`"))),
    }
}

fn body_item(e: &Sexp, b: &mut Block) -> Result<()> {
    if sym(e) == Some("true") {
        return Ok(());
    }
    if let Some(a) = relational(e) {
        b.atoms.push(a);
        return Ok(());
    }
    let items = list(e)?;
    match items.first().and_then(sym) {
        Some("and") => {
            for i in &items[1..] {
                body_item(i, b)?;
            }
        }
        Some("not") if items.len() == 2 && relational(&items[1]).is_some() => {
            b.negated.push(relational(&items[1]).expect("checked"));
        }
        Some("!=") => {
            let (Some(x), Some(y), 3) = (items.get(1).and_then(sym), items.get(2).and_then(sym), items.len()) else {
                return Err(Error::Parse("`!=` takes two variables".into()));
            };
            b.distinct.push((x.to_string(), y.to_string()));
        }
        Some("any") => {
            for i in &items[1..] {
                b.any.push(relational(i).ok_or_else(|| Error::Parse("`any` takes relational atoms".into()))?);
            }
        }
        _ => b.subs.push((String::new(), formula(e)?)),
    }
    Ok(())
}

fn block(vars: &Sexp, body: &[Sexp]) -> Result<Block> {
    let mut b = Block {
        vars: var_list(vars)?,
        ..Block::default()
    };
    for e in body {
        body_item(e, &mut b)?;
    }
    Ok(b)
}

fn formula(e: &Sexp) -> Result<Formula> {
    match e {
        Sexp::Sym(s) if s == "true" => return Ok(Formula::truth("")),
        Sexp::Sym(s) if s == "false" => return Ok(Formula::falsity("")),
        Sexp::Sym(s) => return Err(Error::Parse(format!("unexpected symbol `{s}`"))),
        Sexp::List(_) => {}
    }
    if let Some(a) = relational(e) {
        return Ok(Formula::Exists(Block {
            atoms: vec![a],
            ..Block::default()
        }));
    }
    let items = list(e)?;
    let head = items.first().and_then(sym).ok_or_else(|| Error::Parse("empty or headless list".into()))?;
    let rest = &items[1..];
    let need = |n: usize| {
        if rest.len() < n {
            Err(Error::Parse(format!("`{head}` needs at least {n} arguments")))
        } else {
            Ok(())
        }
    };
    match head {
        "not" => {
            if rest.len() != 1 {
                return Err(Error::Parse("`not` takes one argument".into()));
            }
            Ok(Formula::not(formula(&rest[0])?))
        }
        "or" | "and" => {
            need(1)?;
            let mut parts = rest.iter().map(formula);
            let first = parts.next().expect("non-empty")?;
            parts.try_fold(first, |acc, p| {
                let p = p?;
                Ok(if head == "or" { Formula::or(acc, p) } else { Formula::and(acc, p) })
            })
        }
        "exists" => {
            need(1)?;
            Ok(Formula::Exists(block(&rest[0], &rest[1..])?))
        }
        "exists>=" => {
            need(2)?;
            let n: u64 = sym(&rest[0])
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Parse("counting bound must be a positive integer".into()))?;
            Ok(Formula::Count(n, block(&rest[1], &rest[2..])?))
        }
        "ghml" => {
            need(2)?;
            let mut vars = Vec::new();
            let mut counts = Vec::new();
            for p in list(&rest[0])? {
                let p = list(p)?;
                match (p.first().and_then(sym), p.get(1).and_then(sym).and_then(|s| s.parse().ok()), p.len()) {
                    (Some(v), Some(k), 2) => {
                        vars.push(Sexp::Sym(v.to_string()));
                        counts.push(k);
                    }
                    _ => return Err(Error::Parse("graded variables are written `(y k)`".into())),
                }
            }
            let vars = Sexp::List(vars);
            let disjuncts = rest[1..].iter().map(|d| block(&vars, std::slice::from_ref(d))).collect::<Result<_>>()?;
            Ok(Formula::Graded { counts, disjuncts })
        }
        "ratio>=" | "ratio>" => {
            if rest.len() != 4 {
                return Err(Error::Parse(format!("`{head}` takes a threshold, variables, (mu ...) and (nu ...)")));
            }
            let threshold = parse_rational(sym(&rest[0]).ok_or_else(|| Error::Parse("threshold must be a number".into()))?)?;
            let mut b = Block {
                vars: var_list(&rest[1])?,
                ..Block::default()
            };
            let mu = list(&rest[2])?;
            let nu = list(&rest[3])?;
            if mu.first().and_then(sym) != Some("mu") || nu.first().and_then(sym) != Some("nu") {
                return Err(Error::Parse("expected (mu ...) then (nu ...)".into()));
            }
            for m in &mu[1..] {
                if sym(m) != Some("true") {
                    b.subs.push((String::new(), formula(m)?));
                }
            }
            for n in &nu[1..] {
                b.atoms.push(relational(n).ok_or_else(|| Error::Parse("`nu` takes relational atoms".into()))?);
            }
            Ok(Formula::Ratio {
                strict: head == "ratio>",
                threshold,
                block: b,
            })
        }
        h => Err(Error::Parse(format!("unknown form `{h}`"))),
    }
}

/// Free variables of a formula whose blocks are not yet resolved.
fn free_vars(f: &Formula) -> BTreeSet<Var> {
    match f {
        Formula::Not(g) => free_vars(g),
        Formula::Or(a, b) | Formula::And(a, b) => &free_vars(a) | &free_vars(b),
        Formula::Exists(b) | Formula::Count(_, b) | Formula::Ratio { block: b, .. } => block_free_vars(b),
        Formula::Graded { disjuncts, .. } => disjuncts.iter().flat_map(block_free_vars).collect(),
    }
}

fn block_free_vars(b: &Block) -> BTreeSet<Var> {
    let mut used: BTreeSet<Var> = b
        .atoms
        .iter()
        .chain(&b.negated)
        .chain(&b.any)
        .flat_map(|a| a.args.iter().cloned())
        .chain(b.distinct.iter().flat_map(|(x, y)| [x.clone(), y.clone()]))
        .collect();
    for (_, s) in &b.subs {
        used.extend(free_vars(s));
    }
    for v in &b.vars {
        used.remove(v);
    }
    used
}

fn resolve_block(b: &Block, x: &str) -> Result<Block> {
    let stray: Vec<Var> = block_free_vars(b).into_iter().filter(|v| v != x).collect();
    if !stray.is_empty() {
        return Err(Error::Parse(format!("unary formula over `{x}` also uses {}", stray.join(", "))));
    }
    let mut out = Block {
        free: x.to_string(),
        subs: Vec::new(),
        ..b.clone()
    };
    for (_, s) in &b.subs {
        let fv = free_vars(s);
        if fv.len() > 1 {
            return Err(Error::Parse(format!("subformula uses several free variables: {}", fv.into_iter().collect::<Vec<_>>().join(", "))));
        }
        let z = fv.into_iter().next().unwrap_or_else(|| x.to_string());
        if z != x && !b.vars.contains(&z) {
            return Err(Error::Parse(format!("variable `{z}` is not in scope")));
        }
        out.subs.push((z.clone(), resolve(s, &z)?));
    }
    Ok(out)
}

fn resolve(f: &Formula, x: &str) -> Result<Formula> {
    Ok(match f {
        Formula::Not(g) => Formula::not(resolve(g, x)?),
        Formula::Or(a, b) => Formula::or(resolve(a, x)?, resolve(b, x)?),
        Formula::And(a, b) => Formula::and(resolve(a, x)?, resolve(b, x)?),
        Formula::Exists(b) => Formula::Exists(resolve_block(b, x)?),
        Formula::Count(n, b) => Formula::Count(*n, resolve_block(b, x)?),
        Formula::Graded { counts, disjuncts } => Formula::Graded {
            counts: counts.clone(),
            disjuncts: disjuncts.iter().map(|b| resolve_block(b, x)).collect::<Result<_>>()?,
        },
        Formula::Ratio { strict, threshold, block } => Formula::Ratio {
            strict: *strict,
            threshold: threshold.clone(),
            block: resolve_block(block, x)?,
        },
    })
}

/// Parses a unary formula. Its free variable is the single variable it leaves
/// unbound, or `x` when there is none.
pub fn parse(src: &str) -> Result<Formula> {
    let raw = formula(&read(src)?)?;
    let fv = free_vars(&raw);
    if fv.len() > 1 {
        return Err(Error::Parse(format!(
            "formula has several free variables: {}",
            fv.into_iter().collect::<Vec<_>>().join(", ")
        )));
    }
    let x = fv.into_iter().next().unwrap_or_else(|| "x".to_string());
    let f = resolve(&raw, &x)?;
    f.validate()?;
    Ok(f)
}

fn atom_str(a: &Atom) -> String {
    if a.args.is_empty() {
        format!("({})", a.relation)
    } else {
        format!("({} {})", a.relation, a.args.join(" "))
    }
}

fn body_strs(b: &Block) -> Vec<String> {
    let mut out: Vec<String> = b.atoms.iter().map(atom_str).collect();
    out.extend(b.negated.iter().map(|a| format!("(not {})", atom_str(a))));
    out.extend(b.distinct.iter().map(|(x, y)| format!("(!= {x} {y})")));
    if !b.any.is_empty() {
        out.push(format!("(any {})", b.any.iter().map(atom_str).collect::<Vec<_>>().join(" ")));
    }
    out.extend(b.subs.iter().map(|(_, f)| print_sub(f)));
    out
}

/// Inside a block `(not (R ..))` reads back as a negated atom, so a negated
/// atomic subformula keeps its explicit `exists ()`.
fn print_sub(f: &Formula) -> String {
    match f {
        Formula::Not(g) => match g.as_ref() {
            Formula::Exists(b) if !print(g).starts_with("(exists") && print(g) != "true" => {
                format!("(not {})", with_body("exists ()".into(), body_strs(b)))
            }
            _ => print(f),
        },
        _ => print(f),
    }
}

fn with_body(head: String, body: Vec<String>) -> String {
    if body.is_empty() {
        format!("({head})")
    } else {
        format!("({head} {})", body.join(" "))
    }
}

pub fn print(f: &Formula) -> String {
    match f {
        Formula::Not(g) => format!("(not {})", print(g)),
        Formula::Or(a, b) => format!("(or {} {})", print(a), print(b)),
        Formula::And(a, b) => format!("(and {} {})", print(a), print(b)),
        Formula::Exists(b) => {
            if b.vars.is_empty() && b.subs.is_empty() && b.negated.is_empty() && b.distinct.is_empty() && b.any.is_empty() {
                match b.atoms.len() {
                    0 => return "true".into(),
                    1 => return atom_str(&b.atoms[0]),
                    _ => {}
                }
            }
            with_body(format!("exists ({})", b.vars.join(" ")), body_strs(b))
        }
        Formula::Count(n, b) => with_body(format!("exists>= {n} ({})", b.vars.join(" ")), body_strs(b)),
        Formula::Graded { counts, disjuncts } => {
            let vars: Vec<String> = disjuncts
                .first()
                .map(|b| b.vars.iter().zip(counts).map(|(v, k)| format!("({v} {k})")).collect())
                .unwrap_or_default();
            let ds: Vec<String> = disjuncts.iter().map(|d| with_body("and".into(), body_strs(d))).collect();
            format!("(ghml ({}) {})", vars.join(" "), ds.join(" "))
        }
        Formula::Ratio { strict, threshold, block } => {
            let mu = with_body("mu".into(), block.subs.iter().map(|(_, f)| print(f)).collect());
            let nu = with_body("nu".into(), block.atoms.iter().map(atom_str).collect());
            format!(
                "({} {} ({}) {mu} {nu})",
                if *strict { "ratio>" } else { "ratio>=" },
                threshold,
                block.vars.join(" ")
            )
        }
    }
}
