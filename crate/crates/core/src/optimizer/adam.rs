use ndarray::{Array, Dimension, Zip};

use crate::scalar::Scalar;

/// Adam with bias-corrected moment estimates. Minimizes; negate the
/// gradient to ascend.
#[derive(Debug, Clone)]
pub struct Adam<F, D: Dimension> {
    step_size: F,
    beta1: F,
    beta2: F,
    eps: F,
    t: i32,
    m: Array<F, D>,
    v: Array<F, D>,
}

impl<F: Scalar, D: Dimension> Adam<F, D> {
    pub fn new(shape: D, step_size: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            step_size: F::lit(step_size),
            beta1: F::lit(beta1),
            beta2: F::lit(beta2),
            eps: F::lit(eps),
            t: 0,
            m: Array::zeros(shape.clone()),
            v: Array::zeros(shape),
        }
    }

    pub fn step(&mut self, params: &mut Array<F, D>, grad: &Array<F, D>) {
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = F::one() - b1.powi(self.t);
        let c2 = F::one() - b2.powi(self.t);
        let (lr, eps) = (self.step_size, self.eps);
        Zip::from(params)
            .and(&mut self.m)
            .and(&mut self.v)
            .and(grad)
            .for_each(|p, m, v, &g| {
                *m = b1 * *m + (F::one() - b1) * g;
                *v = b2 * *v + (F::one() - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            });
    }
}
