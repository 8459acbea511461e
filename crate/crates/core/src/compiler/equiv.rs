use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dhn::Dhn;
use crate::error::Result;
use crate::logic::{eval_all, Formula};
use crate::relational::{Database, PointedDatabase, Schema};
use crate::sample::{all_databases, random_database};
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct EquivConfig {
    pub schema: Schema,
    /// Every database with at most this many values is checked.
    pub exhaustive_values: usize,
    /// Skip exhaustive sizes with more databases than this.
    pub exhaustive_limit: usize,
    pub samples: usize,
    pub max_values: usize,
    pub seed: u64,
}

impl Default for EquivConfig {
    fn default() -> Self {
        EquivConfig {
            schema: Schema::graph(),
            exhaustive_values: 3,
            exhaustive_limit: 1 << 12,
            samples: 500,
            max_values: 6,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Disagreement {
    pub database: serde_json::Value,
    pub formula: bool,
    pub network: bool,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct EquivReport {
    pub databases: usize,
    pub pointed: usize,
    /// Largest size that was swept exhaustively.
    pub exhaustive_values: usize,
    pub disagreements: Vec<Disagreement>,
    /// Embedding coordinates that are neither 0 nor 1, summed over all layers.
    pub impure: usize,
}

impl EquivReport {
    pub fn ok(&self) -> bool {
        self.disagreements.is_empty()
    }
}

fn check_one<S: Scalar>(f: &Formula, net: &Dhn<S>, db: &Database, report: &mut EquivReport) -> Result<()> {
    let expected = eval_all(f, db)?;
    let trace = net.trace(db)?;
    for layer in &trace[1..] {
        for x in layer.embedding.values() {
            report.impure += x.iter().filter(|c| !c.is_zero() && !c.is_one()).count();
        }
    }
    let last = trace.last().expect("non-empty trace");
    report.databases += 1;
    for (v, want) in expected {
        let got = net.classifier.accepts(last.get(&v).expect("embedding is total"))?;
        report.pointed += 1;
        if got != want {
            let pdb = PointedDatabase::new(db.clone(), v)?;
            report.disagreements.push(Disagreement {
                database: pdb.to_json(),
                formula: want,
                network: got,
            });
        }
    }
    Ok(())
}

/// Compares a network against the formula oracle at every value of every
/// small database and of seeded random databases.
pub fn check_equivalence<S: Scalar>(f: &Formula, net: &Dhn<S>, cfg: &EquivConfig) -> Result<EquivReport> {
    let schema = cfg.schema.union(&f.schema())?;
    let mut report = EquivReport::default();
    for n in 1..=cfg.exhaustive_values {
        let Some(dbs) = all_databases(&schema, n, cfg.exhaustive_limit) else { break };
        for db in &dbs {
            check_one(f, net, db, &mut report)?;
        }
        report.exhaustive_values = n;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.samples {
        let n = rng.gen_range(1..=cfg.max_values.max(1));
        let p = rng.gen_range(0.1..0.6);
        let db = random_database(&mut rng, &schema, n, p);
        check_one(f, net, &db, &mut report)?;
    }
    Ok(report)
}
