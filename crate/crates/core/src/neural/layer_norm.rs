use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-vector normalization `gamma * (x - mean) / sqrt(var + eps) + beta`.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerNorm<S> {
    pub gamma: Vec<S>,
    pub beta: Vec<S>,
    pub eps: S,
}

#[derive(Clone, Debug)]
pub struct LayerNormTape<S> {
    xhat: Vec<S>,
    inv_std: S,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerNormGrads<S> {
    pub input: Vec<S>,
    pub gamma: Vec<S>,
    pub beta: Vec<S>,
}

impl<S: Scalar> LayerNorm<S> {
    pub fn new(dim: usize, eps: S) -> Self {
        LayerNorm {
            gamma: vec![S::one(); dim],
            beta: vec![S::zero(); dim],
            eps,
        }
    }

    pub fn forward(&self, x: &[S]) -> Result<(Vec<S>, LayerNormTape<S>)> {
        let n = x.len();
        if n == 0 || n != self.gamma.len() {
            return Err(Error::Dim {
                expected: self.gamma.len(),
                got: n,
            });
        }
        let nn = S::from_i64(n as i64);
        let mean = x.iter().cloned().fold(S::zero(), |a, b| a + b) / nn.clone();
        let var = x
            .iter()
            .map(|v| (v.clone() - mean.clone()) * (v.clone() - mean.clone()))
            .fold(S::zero(), |a, b| a + b)
            / nn;
        let std = (var + self.eps.clone())
            .sqrt()
            .ok_or_else(|| Error::Inexact("layer norm needs a square root".into()))?;
        let inv_std = S::one() / std;
        let xhat: Vec<S> = x.iter().map(|v| (v.clone() - mean.clone()) * inv_std.clone()).collect();
        let y = xhat
            .iter()
            .zip(self.gamma.iter().zip(&self.beta))
            .map(|(h, (g, b))| h.clone() * g.clone() + b.clone())
            .collect();
        Ok((y, LayerNormTape { xhat, inv_std }))
    }

    pub fn backward(&self, tape: &LayerNormTape<S>, dy: &[S]) -> LayerNormGrads<S> {
        let n = S::from_i64(dy.len() as i64);
        let dxhat: Vec<S> = dy.iter().zip(&self.gamma).map(|(d, g)| d.clone() * g.clone()).collect();
        let sum = dxhat.iter().cloned().fold(S::zero(), |a, b| a + b);
        let dot = dxhat
            .iter()
            .zip(&tape.xhat)
            .map(|(d, h)| d.clone() * h.clone())
            .fold(S::zero(), |a, b| a + b);
        let input = dxhat
            .iter()
            .zip(&tape.xhat)
            .map(|(d, h)| {
                tape.inv_std.clone() * (d.clone() * n.clone() - sum.clone() - h.clone() * dot.clone()) / n.clone()
            })
            .collect();
        LayerNormGrads {
            input,
            gamma: dy.iter().zip(&tape.xhat).map(|(d, h)| d.clone() * h.clone()).collect(),
            beta: dy.to_vec(),
        }
    }
}
