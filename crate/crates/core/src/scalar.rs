//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, NumAssign};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point element type: `f32`, `f64` or [`crate::DoubleDouble`].
pub trait Scalar:
    Float
    + FromPrimitive
    + NumAssign
    + LinalgScalar
    + ScalarOperand
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal. Never fails for the implemented types.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Smallest tolerance that still makes sense for this precision.
    fn tolerance_floor() -> f64 {
        64.0 * Self::epsilon().as_f64()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Numerically stable softmax of a slice, written into `out`.
pub(crate) fn softmax_into<F: Scalar>(logits: &[F], out: &mut [F]) {
    debug_assert_eq!(logits.len(), out.len());
    let max = logits
        .iter()
        .copied()
        .fold(F::neg_infinity(), |m, x| if x > m { x } else { m });
    let mut total = F::zero();
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// Backpropagates `grad_probs` through a softmax with output `probs`.
pub(crate) fn softmax_backward<F: Scalar>(probs: &[F], grad_probs: &[F], out: &mut [F]) {
    let dot: F = probs.iter().zip(grad_probs).map(|(&p, &g)| p * g).sum();
    for ((o, &p), &g) in out.iter_mut().zip(probs).zip(grad_probs) {
        *o = p * (g - dot);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_is_shift_invariant() {
        let mut a = [0.0f64; 3];
        let mut b = [0.0f64; 3];
        softmax_into(&[1.0, 2.0, 3.0], &mut a);
        softmax_into(&[101.0, 102.0, 103.0], &mut b);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn softmax_handles_large_negative_logits() {
        let mut p = [0.0f32; 2];
        softmax_into(&[0.0, -1000.0], &mut p);
        assert_eq!(p, [1.0, 0.0]);
    }
}
