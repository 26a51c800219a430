//! Dense LU factorization with partial pivoting.
//!
//! The solver never forms an explicit inverse: every `(I - X)^{-1} y` in the
//! closed-form value expressions is a factor-and-solve against `y`. The
//! factorization is kept so the gradient code can reuse it for the transposed
//! (adjoint) solve.

use ndarray::{Array1, Array2, ArrayView1};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is singular to working precision (pivot {pivot:e} at column {column})")]
    Singular { column: usize, pivot: f64 },
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("right-hand side has length {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
}

/// `P A = L U`, stored compactly in one matrix.
#[derive(Debug, Clone)]
pub struct Lu<F> {
    a: Array2<F>,
    lu: Array2<F>,
    perm: Vec<usize>,
    norm1: F,
}

impl<F: Scalar> Lu<F> {
    pub fn factor(mut a: Array2<F>) -> Result<Self, LinalgError> {
        let (n, m) = a.dim();
        if n != m {
            return Err(LinalgError::NotSquare { rows: n, cols: m });
        }
        let original = a.clone();
        let norm1 = one_norm(&a);
        let threshold = F::epsilon() * F::lit(n.max(1) as f64) * norm1;
        let mut perm: Vec<usize> = (0..n).collect();

        for k in 0..n {
            let (mut p, mut best) = (k, a[[k, k]].abs());
            for i in (k + 1)..n {
                let v = a[[i, k]].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !best.is_finite() || best <= threshold {
                return Err(LinalgError::Singular {
                    column: k,
                    pivot: best.as_f64(),
                });
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let tmp = a[[k, j]];
                    a[[k, j]] = a[[p, j]];
                    a[[p, j]] = tmp;
                }
            }
            let pivot = a[[k, k]];
            for i in (k + 1)..n {
                let factor = a[[i, k]] / pivot;
                a[[i, k]] = factor;
                if factor != F::zero() {
                    for j in (k + 1)..n {
                        let u = a[[k, j]];
                        a[[i, j]] -= factor * u;
                    }
                }
            }
        }
        Ok(Self {
            a: original,
            lu: a,
            perm,
            norm1,
        })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Solves `A x = b`, with one step of iterative refinement.
    pub fn solve(&self, b: ArrayView1<F>) -> Result<Array1<F>, LinalgError> {
        let n = self.dim();
        if b.len() != n {
            return Err(LinalgError::Dimension {
                expected: n,
                got: b.len(),
            });
        }
        let mut x = self.raw_solve(b);
        let residual = &b - &self.a.dot(&x);
        x += &self.raw_solve(residual.view());
        Ok(x)
    }

    /// Solves `A^T x = b`, with one step of iterative refinement.
    pub fn solve_transpose(&self, b: ArrayView1<F>) -> Result<Array1<F>, LinalgError> {
        let n = self.dim();
        if b.len() != n {
            return Err(LinalgError::Dimension {
                expected: n,
                got: b.len(),
            });
        }
        let mut x = self.raw_solve_transpose(b);
        let residual = &b - &self.a.t().dot(&x);
        x += &self.raw_solve_transpose(residual.view());
        Ok(x)
    }

    fn raw_solve(&self, b: ArrayView1<F>) -> Array1<F> {
        let n = self.dim();
        let mut x: Array1<F> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[[i, j]] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in (i + 1)..n {
                acc -= self.lu[[i, j]] * x[j];
            }
            x[i] = acc / self.lu[[i, i]];
        }
        x
    }

    fn raw_solve_transpose(&self, b: ArrayView1<F>) -> Array1<F> {
        let n = self.dim();
        // A^T = U^T L^T P, so solve U^T y = b, L^T z = y, x = P^T z.
        let mut y = b.to_owned();
        for i in 0..n {
            let mut acc = y[i];
            for j in 0..i {
                acc -= self.lu[[j, i]] * y[j];
            }
            y[i] = acc / self.lu[[i, i]];
        }
        for i in (0..n).rev() {
            let mut acc = y[i];
            for j in (i + 1)..n {
                acc -= self.lu[[j, i]] * y[j];
            }
            y[i] = acc;
        }
        let mut x = Array1::zeros(n);
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
        x
    }

    /// Estimate of the 1-norm condition number `||A||_1 ||A^{-1}||_1`
    /// (Hager's method, a handful of solves).
    pub fn condition_estimate(&self) -> F {
        let n = self.dim();
        if n == 0 {
            return F::one();
        }
        let mut x = Array1::from_elem(n, F::one() / F::lit(n as f64));
        let mut estimate = F::zero();
        for _ in 0..5 {
            let Ok(y) = self.solve(x.view()) else {
                return F::infinity();
            };
            let y_norm: F = y.iter().map(|v| v.abs()).sum();
            let xi = y.mapv(|v| if v >= F::zero() { F::one() } else { -F::one() });
            let Ok(z) = self.solve_transpose(xi.view()) else {
                return F::infinity();
            };
            let (j, zmax) =
                z.iter()
                    .enumerate()
                    .fold((0, F::neg_infinity()), |(bj, bv), (i, &v)| {
                        if v.abs() > bv {
                            (i, v.abs())
                        } else {
                            (bj, bv)
                        }
                    });
            let zx: F = z.iter().zip(x.iter()).map(|(&a, &b)| a * b).sum();
            if y_norm <= estimate || zmax <= zx {
                estimate = estimate.max(y_norm);
                break;
            }
            estimate = y_norm;
            x.fill(F::zero());
            x[j] = F::one();
        }
        estimate * self.norm1
    }
}

fn one_norm<F: Scalar>(a: &Array2<F>) -> F {
    a.columns()
        .into_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<F>())
        .fold(F::zero(), |m, v| m.max(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn solves_small_system() {
        let a: Array2<f64> = array![[2.0, 1.0], [1.0, 3.0]];
        let lu = Lu::factor(a).unwrap();
        let x = lu.solve(array![3.0, 5.0].view()).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14);
        assert!((x[1] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn detects_singular_matrix() {
        let a: Array2<f64> = array![[1.0, 2.0], [2.0, 4.0]];
        assert!(matches!(Lu::factor(a), Err(LinalgError::Singular { .. })));
    }

    #[test]
    fn condition_of_identity_is_one() {
        let lu = Lu::factor(Array2::<f64>::eye(4)).unwrap();
        assert!((lu.condition_estimate() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn condition_grows_for_near_singular() {
        let a: Array2<f64> = array![[1.0, 1.0], [1.0, 1.0 + 1e-10]];
        let lu = Lu::factor(a).unwrap();
        assert!(lu.condition_estimate() > 1e9);
    }

    proptest! {
        #[test]
        fn solve_and_transpose_solve_have_small_residuals(
            seed in proptest::collection::vec(-1.0f64..1.0, 36),
            rhs in proptest::collection::vec(-1.0f64..1.0, 6),
        ) {
            // Diagonally dominated random matrix: well conditioned.
            let mut a = Array2::from_shape_vec((6, 6), seed).unwrap();
            for i in 0..6 { a[[i, i]] += 8.0; }
            let b = Array1::from(rhs);
            let lu = Lu::factor(a.clone()).unwrap();
            let x = lu.solve(b.view()).unwrap();
            let r = a.dot(&x) - &b;
            prop_assert!(r.iter().all(|v| v.abs() < 1e-12));
            let xt = lu.solve_transpose(b.view()).unwrap();
            let rt = a.t().dot(&xt) - &b;
            prop_assert!(rt.iter().all(|v| v.abs() < 1e-12));
        }
    }
}
