use std::collections::BTreeMap;

use rand::Rng;

use super::{Aggregation, Classifier, Combine, Dhn, DhnLayer, HomQuery, Transform};
use crate::hom::MatchMode;
use crate::neural::{Activation, Fnn, LayerNorm};
use crate::relational::{Database, PointedDatabase, Schema, Value};

#[derive(Clone, Debug, PartialEq)]
pub struct GinConfig {
    pub hidden_dim: usize,
    pub n_layers: usize,
    /// Hidden layers inside each combine network.
    pub combine_hidden_layers: usize,
    pub classifier_hidden: usize,
    pub leaky_slope: f64,
    pub layer_norm: bool,
    pub layer_norm_eps: f64,
}

impl Default for GinConfig {
    fn default() -> Self {
        GinConfig {
            hidden_dim: 32,
            n_layers: 3,
            combine_hidden_layers: 3,
            classifier_hidden: 32,
            leaky_slope: 0.01,
            layer_norm: true,
            layer_norm_eps: 1e-5,
        }
    }
}

fn frozen<S: crate::Scalar>(pattern: PointedDatabase, transforms: BTreeMap<Value, Transform<S>>) -> HomQuery<S> {
    let mut q = HomQuery::new(pattern, transforms, Aggregation::Sum, MatchMode::Hom).expect("well-formed query");
    q.frozen = true;
    q
}

/// Message passing expressed as a network over the graph schema: a
/// single-vertex query (the vertex itself), a single-edge query (sum over
/// out-neighbors) and, in the last layer, a two-isolated-vertices query (sum
/// over all vertices). Query transforms are fixed identities; only the combine
/// networks and the classifier are trainable. The first layer sees constant
/// inputs, so its transforms are the constant 1.
pub fn gin_baseline<R: Rng + ?Sized>(cfg: &GinConfig, rng: &mut R) -> Dhn<f64> {
    let schema = Schema::graph();
    let d = cfg.hidden_dim;
    let leaky = Activation::LeakyRelu(cfg.leaky_slope);
    let single = PointedDatabase::single(schema.clone(), "r");
    let edge = PointedDatabase::new(Database::from_edges(&[("r", "n")]), Value::new("r")).expect("root");
    let pair = PointedDatabase::new(Database::new(schema).with_value("u"), Value::new("r")).expect("root");
    let mut layers = Vec::new();
    for i in 0..cfg.n_layers {
        let (inp, width) = if i == 0 { (0, 1) } else { (d, d) };
        let ident = || {
            Transform::new(if i == 0 {
                Fnn::constant(0, vec![1.0])
            } else {
                Fnn::identity(d)
            })
        };
        let ones = || Transform::new(Fnn::constant(inp, vec![1.0; width]));
        let r = Value::new("r");
        let mut queries = vec![
            frozen(single.clone(), BTreeMap::from([(r.clone(), ident())])),
            frozen(edge.clone(), BTreeMap::from([(r.clone(), ones()), (Value::new("n"), ident())])),
        ];
        let last = i + 1 == cfg.n_layers;
        if last {
            queries.push(frozen(pair.clone(), BTreeMap::from([(r, ones()), (Value::new("u"), ident())])));
        }
        let mut dims = vec![width * queries.len()];
        dims.extend(std::iter::repeat_n(d, cfg.combine_hidden_layers));
        dims.push(d);
        let combine = Fnn::random(&dims, leaky.clone(), leaky.clone(), rng);
        let mut layer = DhnLayer::new(queries, Combine::Fnn(combine)).expect("dims chain");
        if cfg.layer_norm && !last {
            layer.layer_norm = Some(LayerNorm::new(d, cfg.layer_norm_eps));
        }
        layers.push(layer);
    }
    let net = Fnn::random(&[d, cfg.classifier_hidden, 1], leaky, Activation::Identity, rng);
    Dhn::new(layers, Classifier::Fnn { net, threshold: 0.0 }).expect("dims chain")
}
