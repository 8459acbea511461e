use super::{Aggregation, Combine, Dhn, DhnLayer, HomQuery, Transform};
use crate::error::{Error, Result};
use crate::hom::{lovasz_free_expansion, Lovasz, MatchMode};
use crate::neural::{Dense, Fnn};
use crate::scalar::Scalar;

/// Rewrites every sum-aggregated embedding query as a linear combination of
/// homomorphism queries. The coefficients are folded into the first affine
/// layer of the combine function, so outputs are unchanged.
pub fn den_to_dhn_sum<S: Scalar>(net: &Dhn<S>) -> Result<Dhn<S>> {
    let mut layers = Vec::with_capacity(net.layers.len());
    for l in &net.layers {
        if let Some(q) = l.queries.iter().find(|q| q.agg != Aggregation::Sum) {
            return Err(Error::Unsupported(format!("conversion needs sum aggregation, found {}", q.agg)));
        }
        let Combine::Fnn(f) = &l.combine else {
            return Err(Error::Unsupported("conversion needs an FNN combine".into()));
        };
        let Some(first) = f.layers.first() else {
            return Err(Error::Unsupported("combine has no affine layer".into()));
        };
        let width = first.outputs;
        let mut queries = Vec::new();
        let mut weights: Vec<S> = Vec::new();
        let mut offset = 0;
        for q in &l.queries {
            let d = q.output_dim();
            let rows = &first.weights[offset * width..(offset + d) * width];
            offset += d;
            if q.mode != MatchMode::Embedding {
                queries.push(q.clone());
                weights.extend_from_slice(rows);
                continue;
            }
            let mut lv = Lovasz::new(&q.pattern);
            let terms = lovasz_free_expansion(&mut lv, &q.pattern, &q.free_facts)?;
            for (key, c) in terms {
                let pattern = lv.pattern(&key);
                let mut transforms = std::collections::BTreeMap::new();
                for block in &key.blocks {
                    let vals = lv.original_values();
                    let mut t: Transform<S> = q.transforms[&vals[block[0]]].clone();
                    for &i in &block[1..] {
                        t = t.product(&q.transforms[&vals[i]]);
                    }
                    transforms.insert(lv.block_value(block), t);
                }
                let mut hq = HomQuery::new(pattern, transforms, Aggregation::Sum, MatchMode::Hom)?;
                hq.frozen = q.frozen;
                queries.push(hq);
                let c = S::from_rational(&num_rational::BigRational::from_integer(c));
                weights.extend(rows.iter().map(|w| c.clone() * w.clone()));
            }
        }
        let inputs = weights.len() / width.max(1);
        let head = Dense::new(inputs, width, weights, first.bias.clone(), first.activation.clone())?;
        let mut dense = vec![head];
        dense.extend(f.layers[1..].iter().cloned());
        let mut layer = DhnLayer::new(queries, Combine::Fnn(Fnn::new(inputs, dense)?))?;
        layer.layer_norm = l.layer_norm.clone();
        layers.push(layer);
    }
    Dhn::new(layers, net.classifier.clone())
}
