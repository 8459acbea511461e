//! Feed-forward networks with exact or floating evaluation and reverse-mode gradients.

mod adam;
mod layer_norm;
mod loss;

pub use adam::Adam;
pub use layer_norm::{LayerNorm, LayerNormGrads, LayerNormTape};
pub use loss::{bce_with_logits, sigmoid};

use rand::Rng;
use serde_json::{json, Value as Json};

use crate::error::{Error, Result};
use crate::scalar::{vec_from_json, vec_to_json, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub enum Activation<S> {
    Relu,
    /// Truncated ReLU: `min(max(0, x), 1)`.
    ReluStar,
    LeakyRelu(S),
    Identity,
    /// `1` for `x >= 0`, else `0`. Forward only.
    Heaviside,
}

impl<S: Scalar> Activation<S> {
    pub fn apply(&self, z: &S) -> S {
        match self {
            Activation::Relu => S::max_of(z.clone(), S::zero()),
            Activation::ReluStar => {
                if *z <= S::zero() {
                    S::zero()
                } else if *z >= S::one() {
                    S::one()
                } else {
                    z.clone()
                }
            }
            Activation::LeakyRelu(a) => {
                if *z > S::zero() {
                    z.clone()
                } else {
                    a.clone() * z.clone()
                }
            }
            Activation::Identity => z.clone(),
            Activation::Heaviside => crate::scalar::indicator(*z >= S::zero()),
        }
    }

    /// Derivative at `z`; kinks get subgradient 0 (1 for leaky ReLU's right side only).
    pub fn derivative(&self, z: &S) -> Result<S> {
        Ok(match self {
            Activation::Relu => crate::scalar::indicator(*z > S::zero()),
            Activation::ReluStar => crate::scalar::indicator(*z > S::zero() && *z < S::one()),
            Activation::LeakyRelu(a) => {
                if *z > S::zero() {
                    S::one()
                } else {
                    a.clone()
                }
            }
            Activation::Identity => S::one(),
            Activation::Heaviside => return Err(Error::NoGradient("heaviside".into())),
        })
    }

    fn to_json(&self) -> Json {
        match self {
            Activation::Relu => json!("relu"),
            Activation::ReluStar => json!("relu*"),
            Activation::LeakyRelu(a) => json!({ "leaky_relu": a.to_json() }),
            Activation::Identity => json!("identity"),
            Activation::Heaviside => json!("heaviside"),
        }
    }

    fn from_json(v: &Json) -> Result<Self> {
        if let Some(s) = v.as_str() {
            return match s {
                "relu" => Ok(Activation::Relu),
                "relu*" => Ok(Activation::ReluStar),
                "identity" => Ok(Activation::Identity),
                "heaviside" => Ok(Activation::Heaviside),
                _ => Err(Error::Parse(format!("unknown activation `{s}`"))),
            };
        }
        match v.get("leaky_relu") {
            Some(a) => Ok(Activation::LeakyRelu(S::from_json(a)?)),
            None => Err(Error::Parse(format!("bad activation {v}"))),
        }
    }
}

/// One affine layer followed by an activation. Weights are `inputs x outputs`,
/// row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<S> {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<S>,
    pub bias: Vec<S>,
    pub activation: Activation<S>,
}

impl<S: Scalar> Dense<S> {
    pub fn new(inputs: usize, outputs: usize, weights: Vec<S>, bias: Vec<S>, activation: Activation<S>) -> Result<Self> {
        if weights.len() != inputs * outputs {
            return Err(Error::Dim {
                expected: inputs * outputs,
                got: weights.len(),
            });
        }
        if bias.len() != outputs {
            return Err(Error::Dim {
                expected: outputs,
                got: bias.len(),
            });
        }
        Ok(Dense {
            inputs,
            outputs,
            weights,
            bias,
            activation,
        })
    }

    pub fn zeros(inputs: usize, outputs: usize, activation: Activation<S>) -> Self {
        Dense {
            inputs,
            outputs,
            weights: vec![S::zero(); inputs * outputs],
            bias: vec![S::zero(); outputs],
            activation,
        }
    }

    pub fn w(&self, i: usize, j: usize) -> &S {
        &self.weights[i * self.outputs + j]
    }

    pub fn set_w(&mut self, i: usize, j: usize, v: S) {
        self.weights[i * self.outputs + j] = v;
    }

    fn affine(&self, x: &[S]) -> Vec<S> {
        let mut z = self.bias.clone();
        for (i, xi) in x.iter().enumerate() {
            if xi.is_zero() {
                continue;
            }
            let row = &self.weights[i * self.outputs..(i + 1) * self.outputs];
            for (zj, w) in z.iter_mut().zip(row) {
                *zj = zj.clone() + xi.clone() * w.clone();
            }
        }
        z
    }

    /// Single-affine-plus-ReLU* check used for simple networks.
    pub fn is_simple(&self) -> bool {
        self.activation == Activation::ReluStar
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fnn<S> {
    pub input_dim: usize,
    pub layers: Vec<Dense<S>>,
}

/// Primal values recorded by [`Fnn::forward_tape`].
#[derive(Clone, Debug)]
pub struct GradTape<S> {
    inputs: Vec<Vec<S>>,
    pre: Vec<Vec<S>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FnnGrads<S> {
    /// Per layer: (weight gradient, bias gradient), shaped like the layer.
    pub layers: Vec<(Vec<S>, Vec<S>)>,
    pub input: Vec<S>,
}

impl<S: Scalar> Fnn<S> {
    pub fn new(input_dim: usize, layers: Vec<Dense<S>>) -> Result<Self> {
        let mut d = input_dim;
        for l in &layers {
            if l.inputs != d {
                return Err(Error::Dim {
                    expected: d,
                    got: l.inputs,
                });
            }
            d = l.outputs;
        }
        Ok(Fnn { input_dim, layers })
    }

    /// One layer `x -> act(A x + b)`.
    pub fn single(layer: Dense<S>) -> Self {
        Fnn {
            input_dim: layer.inputs,
            layers: vec![layer],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut d = Dense::zeros(dim, dim, Activation::Identity);
        for i in 0..dim {
            d.set_w(i, i, S::one());
        }
        Fnn::single(d)
    }

    /// Ignores its input and returns `value`.
    pub fn constant(input_dim: usize, value: Vec<S>) -> Self {
        let mut d = Dense::zeros(input_dim, value.len(), Activation::Identity);
        d.bias = value;
        Fnn::single(d)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(self.input_dim, |l| l.outputs)
    }

    pub fn forward(&self, x: &[S]) -> Result<Vec<S>> {
        if x.len() != self.input_dim {
            return Err(Error::Dim {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        let mut h = x.to_vec();
        for l in &self.layers {
            h = l.affine(&h).iter().map(|z| l.activation.apply(z)).collect();
        }
        Ok(h)
    }

    pub fn forward_tape(&self, x: &[S]) -> Result<(Vec<S>, GradTape<S>)> {
        if x.len() != self.input_dim {
            return Err(Error::Dim {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        let mut tape = GradTape {
            inputs: Vec::with_capacity(self.layers.len()),
            pre: Vec::with_capacity(self.layers.len()),
        };
        let mut h = x.to_vec();
        for l in &self.layers {
            let z = l.affine(&h);
            let out = z.iter().map(|z| l.activation.apply(z)).collect();
            tape.inputs.push(h);
            tape.pre.push(z);
            h = out;
        }
        Ok((h, tape))
    }

    pub fn backward(&self, tape: &GradTape<S>, upstream: &[S]) -> Result<FnnGrads<S>> {
        if tape.pre.len() != self.layers.len() {
            return Err(Error::Dim {
                expected: self.layers.len(),
                got: tape.pre.len(),
            });
        }
        if upstream.len() != self.output_dim() {
            return Err(Error::Dim {
                expected: self.output_dim(),
                got: upstream.len(),
            });
        }
        let mut grads = vec![(Vec::new(), Vec::new()); self.layers.len()];
        let mut dh = upstream.to_vec();
        for (k, l) in self.layers.iter().enumerate().rev() {
            let dz: Vec<S> = tape.pre[k]
                .iter()
                .zip(&dh)
                .map(|(z, g)| Ok(l.activation.derivative(z)? * g.clone()))
                .collect::<Result<_>>()?;
            let x = &tape.inputs[k];
            let mut dw = vec![S::zero(); l.inputs * l.outputs];
            let mut dx = vec![S::zero(); l.inputs];
            for i in 0..l.inputs {
                for j in 0..l.outputs {
                    dw[i * l.outputs + j] = x[i].clone() * dz[j].clone();
                    dx[i] = dx[i].clone() + l.w(i, j).clone() * dz[j].clone();
                }
            }
            grads[k] = (dw, dz);
            dh = dx;
        }
        Ok(FnnGrads {
            layers: grads,
            input: dh,
        })
    }

    /// Visits weights then biases, layer by layer.
    pub fn for_each_param_mut(&mut self, f: &mut dyn FnMut(&mut S)) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(&mut *f);
            l.bias.iter_mut().for_each(&mut *f);
        }
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_simple(&self) -> bool {
        self.layers.len() == 1 && self.layers[0].is_simple()
    }

    pub fn to_json(&self) -> Json {
        json!({
            "input_dim": self.input_dim,
            "layers": self.layers.iter().map(|l| {
                let rows: Vec<Json> = (0..l.inputs)
                    .map(|i| vec_to_json(&l.weights[i * l.outputs..(i + 1) * l.outputs]))
                    .collect();
                json!({
                    "inputs": l.inputs,
                    "outputs": l.outputs,
                    "weights": rows,
                    "bias": vec_to_json(&l.bias),
                    "activation": l.activation.to_json(),
                })
            }).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &Json) -> Result<Self> {
        let input_dim = v["input_dim"]
            .as_u64()
            .ok_or_else(|| Error::Parse("fnn: missing input_dim".into()))? as usize;
        let mut layers = Vec::new();
        for l in v["layers"].as_array().ok_or_else(|| Error::Parse("fnn: missing layers".into()))? {
            let bias: Vec<S> = vec_from_json(&l["bias"])?;
            let inputs = l["inputs"].as_u64().ok_or_else(|| Error::Parse("fnn: missing inputs".into()))? as usize;
            let mut weights = Vec::new();
            for row in l["weights"].as_array().ok_or_else(|| Error::Parse("fnn: missing weights".into()))? {
                weights.extend(vec_from_json::<S>(row)?);
            }
            layers.push(Dense::new(inputs, bias.len(), weights, bias, Activation::from_json(&l["activation"])?)?);
        }
        Fnn::new(input_dim, layers)
    }
}

impl Fnn<f64> {
    /// Layers of sizes `dims[0] -> dims[1] -> ...`, weights and biases uniform in
    /// `±sqrt(1/fan_in)` (`±1` when `fan_in = 0`).
    pub fn random<R: Rng + ?Sized>(dims: &[usize], hidden: Activation<f64>, output: Activation<f64>, rng: &mut R) -> Self {
        let mut layers = Vec::new();
        for k in 0..dims.len().saturating_sub(1) {
            let (i, o) = (dims[k], dims[k + 1]);
            let bound = if i == 0 { 1.0 } else { (1.0 / i as f64).sqrt() };
            let weights = (0..i * o).map(|_| rng.gen_range(-bound..=bound)).collect();
            let bias = (0..o).map(|_| rng.gen_range(-bound..=bound)).collect();
            let act = if k + 2 == dims.len() { output.clone() } else { hidden.clone() };
            layers.push(Dense {
                inputs: i,
                outputs: o,
                weights,
                bias,
                activation: act,
            });
        }
        Fnn {
            input_dim: dims[0],
            layers,
        }
    }
}
