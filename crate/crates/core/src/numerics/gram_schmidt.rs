use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;
use crate::scalar::{dot, norm2, Scalar};

/// Residual norm below which a candidate vector is treated as dependent.
pub const SKIP_TOLERANCE: f64 = 1e-10;

/// Square matrix whose rows form an orthonormal basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct OrthMatrix<T>(DenseMatrix<T>);

impl<T: Scalar> OrthMatrix<T> {
    pub fn as_matrix(&self) -> &DenseMatrix<T> {
        &self.0
    }

    pub fn into_matrix(self) -> DenseMatrix<T> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn row(&self, i: usize) -> &[T] {
        self.0.row(i)
    }

    /// The inverse of an orthonormal matrix is its transpose.
    pub fn inverse(&self) -> DenseMatrix<T> {
        self.0.transpose()
    }

    /// `max |S·Sᵀ − I|`.
    pub fn orthogonality_error(&self) -> T {
        self.0.gram_rows().max_abs_from_identity()
    }
}

/// Completes `c` to an orthonormal basis of `ℝ^dim(c)`.
///
/// The first row is `c/‖c‖₂`. The remaining rows come from Gram-Schmidt over
/// the standard basis vectors in order, dropping any whose residual falls below
/// [`SKIP_TOLERANCE`]. Each candidate is orthogonalized twice against the
/// accepted rows to keep the result orthonormal to working precision.
pub fn gram_schmidt_complete<T: Scalar>(c: &[T]) -> Result<OrthMatrix<T>> {
    let n = c.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if let Some(i) = c.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("classifier coefficient {i}")));
    }
    let norm = norm2(c);
    if norm == T::zero() {
        return Err(Error::DegenerateClassifier);
    }

    let mut basis: Vec<Vec<T>> = Vec::with_capacity(n);
    basis.push(c.iter().map(|&v| v / norm).collect());

    let tol = T::lit(SKIP_TOLERANCE);
    for k in 0..n {
        if basis.len() == n {
            break;
        }
        let mut v = vec![T::zero(); n];
        v[k] = T::one();
        for _ in 0..2 {
            for b in &basis {
                let p = dot(&v, b);
                for (vi, &bi) in v.iter_mut().zip(b) {
                    *vi -= p * bi;
                }
            }
        }
        let r = norm2(&v);
        if r < tol {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= r);
        basis.push(v);
    }
    debug_assert_eq!(basis.len(), n);
    Ok(OrthMatrix(DenseMatrix::from_rows(&basis)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn axis_aligned() {
        let s = gram_schmidt_complete(&[1.0, 0.0]).unwrap();
        assert_eq!(s.as_matrix().as_slice(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn diagonal_direction_in_2d() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = gram_schmidt_complete(&[h, h]).unwrap();
        let second = s.row(1);
        let expected = [h, -h];
        let sign = second[0].signum();
        for (a, b) in second.iter().zip(expected) {
            assert!((a - sign * b).abs() < 1e-12);
        }
        assert!(s.orthogonality_error() < 1e-12);
    }

    #[test]
    fn zero_vector_is_degenerate() {
        let err = gram_schmidt_complete(&[0.0, 0.0, 0.0]).unwrap_err();
        assert_eq!(err.to_string(), "degenerate classifier");
    }

    #[test]
    fn first_row_is_normalized_input() {
        let s = gram_schmidt_complete::<f64>(&[3.0, 4.0, 0.0]).unwrap();
        assert!((s.row(0)[0] - 0.6).abs() < 1e-15);
        assert!((s.row(0)[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn inverse_is_transpose() {
        let s = gram_schmidt_complete(&[0.3, -1.2, 2.0, 0.5, 0.1]).unwrap();
        let prod = s.as_matrix().matmul(&s.inverse()).unwrap();
        assert!(prod.max_abs_from_identity() < 1e-12);
    }

    proptest! {
        #[test]
        fn completion_is_orthonormal(c in prop::collection::vec(-10.0f64..10.0, 2..50)) {
            prop_assume!(norm2(&c) > 1e-6);
            let s = gram_schmidt_complete(&c).unwrap();
            prop_assert_eq!(s.dim(), c.len());
            prop_assert!(s.orthogonality_error() <= 1e-8);
        }
    }
}
