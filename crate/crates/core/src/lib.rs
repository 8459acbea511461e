//! Deep homomorphism networks over relational databases.

pub mod analysis;
pub mod compiler;
pub mod datasets;
pub mod dhn;
pub mod error;
pub mod hom;
pub mod logic;
pub mod neural;
pub mod relational;
pub mod sample;
pub mod scalar;
pub mod train;

pub use error::{Error, Result};
pub use relational::{Database, EmbeddedDatabase, Fact, PointedDatabase, Schema, Value};
pub use scalar::{Rational, Scalar};

/// Networks over exact rationals, as produced by the compiler.
pub type ExactDhn = dhn::Dhn<Rational>;
/// Networks over `f64`, as produced by training.
pub type FloatDhn = dhn::Dhn<f64>;
pub type ExactFnn = neural::Fnn<Rational>;
pub type FloatFnn = neural::Fnn<f64>;
