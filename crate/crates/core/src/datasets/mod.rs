//! Synthetic vertex-classification datasets with ground-truth oracles.

mod lt;
mod sun;

pub use lt::{gen_local_transitivity, oracle_local_transitivity, pattern_catalog_lt, LtParams};
pub use sun::{gen_sun, oracle_sun, sun_patterns, SunParams};

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value as Json;

use crate::error::{Error, Result};
use crate::relational::{Database, DatabaseDoc, Value};

pub const GENERATOR_VERSION: &str = "1";

/// A database with labels on its example values. Values without a label are
/// filler.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub db: Database,
    pub labels: BTreeMap<Value, bool>,
    pub meta: Json,
}

impl Dataset {
    pub fn examples(&self) -> Vec<Value> {
        self.labels.keys().cloned().collect()
    }

    pub fn positives(&self) -> usize {
        self.labels.values().filter(|&&b| b).count()
    }

    pub fn to_json(&self) -> Json {
        let mut doc = self.db.to_doc();
        doc.labels = Some(self.labels.iter().map(|(v, &b)| (v.to_string(), b as u8)).collect());
        doc.meta = Some(self.meta.clone());
        serde_json::to_value(doc).expect("dataset serializes")
    }

    pub fn from_json(v: &Json) -> Result<Self> {
        let doc: DatabaseDoc = serde_json::from_value(v.clone())?;
        let db = doc.database()?;
        let labels = doc.labels();
        if let Some(v) = labels.keys().find(|v| !db.has_value(v)) {
            return Err(Error::Schema(format!("label on unknown value `{v}`")));
        }
        Ok(Dataset {
            db,
            labels,
            meta: doc.meta.unwrap_or(Json::Null),
        })
    }
}

/// Train, validation and test indices into a list of examples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded permutation of `0..n` cut into contiguous parts. The test part
/// takes the rounding remainder.
pub fn split(n: usize, seed: u64, ratios: (f64, f64, f64)) -> Result<Split> {
    let (a, b, c) = ratios;
    if [a, b, c].iter().any(|r| !(0.0..=1.0).contains(r)) || (a + b + c - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split ratios {ratios:?} must be in [0, 1] and sum to 1")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (a * n as f64).round() as usize;
    let n_val = ((b * n as f64).round() as usize).min(n - n_train);
    let test = idx.split_off(n_train + n_val);
    let val = idx.split_off(n_train);
    Ok(Split { train: idx, val, test })
}

#[cfg(test)]
mod tests;
