use num_bigint::BigInt;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use homnet::neural::{Activation, Dense, Fnn};
use homnet::{Rational, Scalar};

const ACTS: [Activation<f64>; 4] = [Activation::Identity, Activation::Relu, Activation::ReluStar, Activation::LeakyRelu(0.01)];

fn to_rational_act(a: &Activation<f64>) -> Activation<Rational> {
    match a {
        Activation::Relu => Activation::Relu,
        Activation::ReluStar => Activation::ReluStar,
        Activation::LeakyRelu(_) => Activation::LeakyRelu(Rational::new(BigInt::from(1), BigInt::from(100))),
        _ => Activation::Identity,
    }
}

/// A random net with small rational weights, in both backends.
fn twin(seed: u64) -> (Fnn<Rational>, Fnn<f64>, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = rng.gen_range(1..=3);
    let dims: Vec<usize> = (0..=depth).map(|_| rng.gen_range(1..=8)).collect();
    let mut exact = Vec::new();
    let mut float = Vec::new();
    for k in 0..depth {
        let act = ACTS[rng.gen_range(0..ACTS.len())].clone();
        let (i, o) = (dims[k], dims[k + 1]);
        let w: Vec<Rational> = (0..i * o).map(|_| Rational::new(rng.gen_range(-8..=8).into(), rng.gen_range(1..=8).into())).collect();
        let b: Vec<Rational> = (0..o).map(|_| Rational::new(rng.gen_range(-8..=8).into(), rng.gen_range(1..=8).into())).collect();
        let wf = w.iter().map(Scalar::to_f64).collect();
        let bf = b.iter().map(Scalar::to_f64).collect();
        exact.push(Dense::new(i, o, w, b, to_rational_act(&act)).unwrap());
        float.push(Dense::new(i, o, wf, bf, act).unwrap());
    }
    (Fnn::new(dims[0], exact).unwrap(), Fnn::new(dims[0], float).unwrap(), dims[0])
}

/// Product of per-layer Frobenius norms: an upper bound on the Lipschitz
/// constant, since every activation here is 1-Lipschitz.
fn lipschitz_bound(net: &Fnn<f64>) -> f64 {
    net.layers.iter().map(|l| l.weights.iter().map(|w| w * w).sum::<f64>().sqrt()).product()
}

fn norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

proptest! {
    #[test]
    fn exact_and_float_forward_agree(seed in any::<u64>(), xs in proptest::collection::vec(-16i64..=16, 8)) {
        let (exact, float, d) = twin(seed);
        let xr: Vec<Rational> = xs[..d].iter().map(|&x| Rational::new(x.into(), BigInt::from(4))).collect();
        let xf: Vec<f64> = xr.iter().map(Scalar::to_f64).collect();
        let a = exact.forward(&xr).unwrap();
        let b = float.forward(&xf).unwrap();
        for (p, q) in a.iter().zip(&b) {
            prop_assert!((p.to_f64() - q).abs() <= 1e-9 * (1.0 + q.abs()));
        }
    }

    #[test]
    fn lipschitz_spot_check(seed in any::<u64>(), xs in proptest::collection::vec(-3.0f64..3.0, 16)) {
        let (_, net, d) = twin(seed);
        let (x, y) = (&xs[..d], &xs[8..8 + d]);
        let gap = norm(&net.forward(x).unwrap(), &net.forward(y).unwrap());
        prop_assert!(gap <= lipschitz_bound(&net) * norm(x, y) + 1e-9);
    }

    #[test]
    fn gradients_match_finite_differences(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let depth = rng.gen_range(1..=3);
        let dims: Vec<usize> = (0..=depth).map(|_| rng.gen_range(1..=8)).collect();
        let net = Fnn::random(&dims, Activation::LeakyRelu(0.01), Activation::Identity, &mut rng);
        let x: Vec<f64> = (0..dims[0]).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let up: Vec<f64> = (0..net.output_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, tape) = net.forward_tape(&x).unwrap();
        let g = net.backward(&tape, &up).unwrap();
        let f = |n: &Fnn<f64>, x: &[f64]| n.forward(x).unwrap().iter().zip(&up).map(|(a, b)| a * b).sum::<f64>();
        let h = 1e-6;
        for i in 0..x.len() {
            let (mut a, mut b) = (x.clone(), x.clone());
            a[i] += h;
            b[i] -= h;
            let fd = (f(&net, &a) - f(&net, &b)) / (2.0 * h);
            prop_assert!((fd - g.input[i]).abs() < 1e-4 * (1.0 + fd.abs()));
        }
        for (l, (dw, _)) in g.layers.iter().enumerate() {
            for (k, an) in dw.iter().enumerate() {
                let (mut a, mut b) = (net.clone(), net.clone());
                a.layers[l].weights[k] += h;
                b.layers[l].weights[k] -= h;
                let fd = (f(&a, &x) - f(&b, &x)) / (2.0 * h);
                prop_assert!((fd - an).abs() < 1e-4 * (1.0 + fd.abs()));
            }
        }
    }

    #[test]
    fn json_round_trip(seed in any::<u64>()) {
        let (exact, float, _) = twin(seed);
        prop_assert_eq!(Fnn::<Rational>::from_json(&exact.to_json()).unwrap(), exact);
        prop_assert_eq!(Fnn::<f64>::from_json(&float.to_json()).unwrap(), float);
    }
}
