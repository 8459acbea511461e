use crate::error::{Error, Result};

/// Bias-corrected Adam over a flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self::with_betas(lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam {
            lr,
            beta1,
            beta2,
            eps,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Dim {
                expected: params.len(),
                got: grads.len(),
            });
        }
        if self.m.is_empty() {
            self.m = vec![0.0; params.len()];
            self.v = vec![0.0; params.len()];
        } else if self.m.len() != params.len() {
            return Err(Error::Dim {
                expected: self.m.len(),
                got: params.len(),
            });
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((p, &g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let mh = *m / c1;
            let vh = *v / c2;
            *p -= self.lr * mh / (vh.sqrt() + self.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_is_lr_sized() {
        let mut a = Adam::new(0.1);
        let mut w = [0.0];
        a.step(&mut w, &[1.0]).unwrap();
        let expect = -0.1 * 1.0 / (1.0 + 1e-8);
        assert!((w[0] - expect).abs() < 1e-6);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut a = Adam::new(0.1);
        let mut w = [0.7, -1.0];
        a.step(&mut w, &[0.0, 0.0]).unwrap();
        assert_eq!(w, [0.7, -1.0]);
    }

    #[test]
    fn constant_gradient_moves_monotonically() {
        let mut a = Adam::new(0.01);
        let mut w = [1.0];
        let mut prev = w[0];
        for _ in 0..2 {
            a.step(&mut w, &[0.5]).unwrap();
            assert!(w[0] < prev);
            prev = w[0];
        }
    }

    #[test]
    fn shape_mismatch() {
        let mut a = Adam::new(0.1);
        assert!(a.step(&mut [0.0, 1.0], &[1.0]).is_err());
    }
}
