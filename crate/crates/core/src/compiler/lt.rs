use std::collections::BTreeMap;

use crate::dhn::{Aggregation, Classifier, Combine, Dhn, DhnLayer, HomQuery, Transform};
use crate::error::Result;
use crate::hom::MatchMode;
use crate::neural::{Activation, Dense, Fnn};
use crate::relational::{Database, PointedDatabase, Schema, Value};
use crate::scalar::Scalar;

fn counting_query<S: Scalar>(edges: &[(&str, &str)]) -> Result<HomQuery<S>> {
    let pattern = PointedDatabase::new(Database::from_edges(edges), Value::new("r"))?;
    let mut one = Dense::zeros(0, 1, Activation::ReluStar);
    one.bias[0] = S::one();
    let t = Transform::new(Fnn::single(one));
    let transforms: BTreeMap<Value, Transform<S>> = pattern.db.adom().iter().map(|v| (v.clone(), t.clone())).collect();
    HomQuery::new(pattern, transforms, Aggregation::Sum, MatchMode::Hom)
}

/// Two-layer simple sum-DHN accepting exactly the locally transitive
/// vertices: it compares the number of homomorphic 2-paths from the root with
/// the number of those closed by an edge back from the root.
pub fn local_transitivity_network<S: Scalar>() -> Result<Dhn<S>> {
    let path = counting_query(&[("r", "a"), ("a", "b")])?;
    let closed = counting_query(&[("r", "a"), ("a", "b"), ("r", "b")])?;
    let mut diff = Dense::zeros(2, 2, Activation::ReluStar);
    diff.set_w(0, 0, S::one());
    diff.set_w(1, 0, -S::one());
    diff.set_w(0, 1, -S::one());
    diff.set_w(1, 1, S::one());
    let first = DhnLayer::new(vec![path, closed], Combine::Fnn(Fnn::single(diff)))?;

    let mut id = Dense::zeros(2, 2, Activation::ReluStar);
    id.set_w(0, 0, S::one());
    id.set_w(1, 1, S::one());
    let own = HomQuery::uniform(
        PointedDatabase::single(Schema::graph(), "r"),
        Transform::new(Fnn::single(id)),
        Aggregation::Sum,
        MatchMode::Hom,
    )?;
    let mut equal = Dense::zeros(2, 1, Activation::ReluStar);
    equal.set_w(0, 0, -S::one());
    equal.set_w(1, 0, -S::one());
    equal.bias[0] = S::one();
    let second = DhnLayer::new(vec![own], Combine::Fnn(Fnn::single(equal)))?;
    Dhn::new(
        vec![first, second],
        Classifier::Threshold {
            coord: 0,
            value: S::one(),
            strict: false,
        },
    )
}
