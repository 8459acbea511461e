use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Value as Json};

use super::{Aggregation, Classifier, Combine, Dhn, DhnLayer, HomQuery, RatioComparator, Transform};
use crate::error::{Error, Result};
use crate::hom::MatchMode;
use crate::neural::{Fnn, LayerNorm};
use crate::relational::{Fact, PointedDatabase, Value};
use crate::scalar::{vec_from_json, vec_to_json, Scalar};

fn field<'a>(v: &'a Json, k: &str) -> Result<&'a Json> {
    v.get(k).ok_or_else(|| Error::Parse(format!("missing `{k}`")))
}

fn usize_field(v: &Json, k: &str) -> Result<usize> {
    field(v, k)?
        .as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| Error::Parse(format!("`{k}` must be an integer")))
}

fn bool_field(v: &Json, k: &str) -> bool {
    v.get(k).and_then(Json::as_bool).unwrap_or(false)
}

impl<S: Scalar> HomQuery<S> {
    pub fn to_json(&self) -> Json {
        let transforms: serde_json::Map<String, Json> = self
            .transforms
            .iter()
            .map(|(v, t)| (v.to_string(), Json::Array(t.factors.iter().map(Fnn::to_json).collect())))
            .collect();
        let mut out = json!({
            "pattern": self.pattern.to_json(),
            "transforms": transforms,
            "agg": self.agg,
            "mode": self.mode,
        });
        if !self.free_facts.is_empty() {
            out["free_facts"] = Json::Array(
                self.free_facts
                    .iter()
                    .map(|f| {
                        Json::Array(
                            std::iter::once(json!(f.relation))
                                .chain(f.args.iter().map(|a| json!(a.as_str())))
                                .collect(),
                        )
                    })
                    .collect(),
            );
        }
        if self.frozen {
            out["frozen"] = json!(true);
        }
        out
    }

    pub fn from_json(v: &Json) -> Result<Self> {
        let pattern = PointedDatabase::from_json(field(v, "pattern")?)?;
        let mut transforms = BTreeMap::new();
        for (k, t) in field(v, "transforms")?
            .as_object()
            .ok_or_else(|| Error::Parse("`transforms` must be an object".into()))?
        {
            let factors = t
                .as_array()
                .ok_or_else(|| Error::Parse("transform must be a list of networks".into()))?
                .iter()
                .map(Fnn::from_json)
                .collect::<Result<Vec<_>>>()?;
            transforms.insert(Value::new(k), Transform { factors });
        }
        let agg: Aggregation = serde_json::from_value(field(v, "agg")?.clone())?;
        let mode: MatchMode = serde_json::from_value(field(v, "mode")?.clone())?;
        let mut free_facts = BTreeSet::new();
        for row in v.get("free_facts").and_then(Json::as_array).into_iter().flatten() {
            let row: Vec<String> = serde_json::from_value(row.clone())?;
            let (rel, args) = row.split_first().ok_or_else(|| Error::Parse("empty free fact".into()))?;
            free_facts.insert(Fact {
                relation: rel.clone(),
                args: args.iter().map(|a| Value::new(a)).collect(),
            });
        }
        let q = HomQuery {
            pattern,
            transforms,
            agg,
            mode,
            free_facts,
            frozen: bool_field(v, "frozen"),
        };
        q.validate()?;
        Ok(q)
    }
}

impl<S: Scalar> DhnLayer<S> {
    pub fn to_json(&self) -> Json {
        let combine = match &self.combine {
            Combine::Fnn(f) => json!({ "fnn": f.to_json() }),
            Combine::Ratio(r) => json!({ "ratio": {
                "dim": r.dim,
                "slot": r.slot,
                "threshold": r.threshold.to_json(),
                "strict": r.strict,
            }}),
        };
        let mut out = json!({
            "queries": self.queries.iter().map(HomQuery::to_json).collect::<Vec<_>>(),
            "combine": combine,
        });
        if let Some(ln) = &self.layer_norm {
            out["layer_norm"] = json!({
                "gamma": vec_to_json(&ln.gamma),
                "beta": vec_to_json(&ln.beta),
                "eps": ln.eps.to_json(),
            });
        }
        out
    }

    pub fn from_json(v: &Json) -> Result<Self> {
        let queries = field(v, "queries")?
            .as_array()
            .ok_or_else(|| Error::Parse("`queries` must be a list".into()))?
            .iter()
            .map(HomQuery::from_json)
            .collect::<Result<Vec<_>>>()?;
        let c = field(v, "combine")?;
        let combine = if let Some(f) = c.get("fnn") {
            Combine::Fnn(Fnn::from_json(f)?)
        } else if let Some(r) = c.get("ratio") {
            Combine::Ratio(RatioComparator {
                dim: usize_field(r, "dim")?,
                slot: usize_field(r, "slot")?,
                threshold: S::from_json(field(r, "threshold")?)?,
                strict: bool_field(r, "strict"),
            })
        } else {
            return Err(Error::Parse("unknown combine".into()));
        };
        let layer_norm = match v.get("layer_norm") {
            Some(ln) => Some(LayerNorm {
                gamma: vec_from_json(field(ln, "gamma")?)?,
                beta: vec_from_json(field(ln, "beta")?)?,
                eps: S::from_json(field(ln, "eps")?)?,
            }),
            None => None,
        };
        let l = DhnLayer {
            queries,
            combine,
            layer_norm,
        };
        l.validate()?;
        Ok(l)
    }
}

impl<S: Scalar> Dhn<S> {
    pub fn to_json(&self) -> Json {
        let classify = match &self.classifier {
            Classifier::Threshold { coord, value, strict } => json!({ "threshold": {
                "coord": coord,
                "value": value.to_json(),
                "strict": strict,
            }}),
            Classifier::Fnn { net, threshold } => json!({ "fnn": {
                "net": net.to_json(),
                "threshold": threshold.to_json(),
            }}),
        };
        json!({
            "numeric": if S::EXACT { "rational" } else { "float" },
            "layers": self.layers.iter().map(DhnLayer::to_json).collect::<Vec<_>>(),
            "classify": classify,
        })
    }

    pub fn from_json(v: &Json) -> Result<Self> {
        let layers = field(v, "layers")?
            .as_array()
            .ok_or_else(|| Error::Parse("`layers` must be a list".into()))?
            .iter()
            .map(DhnLayer::from_json)
            .collect::<Result<Vec<_>>>()?;
        let c = field(v, "classify")?;
        let classifier = if let Some(t) = c.get("threshold") {
            Classifier::Threshold {
                coord: usize_field(t, "coord")?,
                value: S::from_json(field(t, "value")?)?,
                strict: bool_field(t, "strict"),
            }
        } else if let Some(f) = c.get("fnn") {
            Classifier::Fnn {
                net: Fnn::from_json(field(f, "net")?)?,
                threshold: S::from_json(field(f, "threshold")?)?,
            }
        } else {
            return Err(Error::Parse("unknown classifier".into()));
        };
        Dhn::new(layers, classifier)
    }

    /// Numeric backend recorded in a network document, if any.
    pub fn numeric_of(v: &Json) -> Option<&str> {
        v.get("numeric").and_then(Json::as_str)
    }
}
