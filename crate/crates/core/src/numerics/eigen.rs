use crate::error::{ensure_dim, Error, Result};
use crate::numerics::DenseMatrix;
use crate::scalar::Scalar;

/// Maximum asymmetry accepted by [`inv_sqrt_sym`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;
/// Smallest eigenvalue accepted by [`inv_sqrt_sym`]; anything below is an error.
pub const EIGENVALUE_FLOOR: f64 = 1e-12;

const MAX_SWEEPS: usize = 100;

/// Eigendecomposition `M = V·diag(values)·Vᵀ` of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    pub values: Vec<T>,
    /// Eigenvectors stored as columns.
    pub vectors: DenseMatrix<T>,
}

/// Cyclic Jacobi eigenvalue iteration for symmetric matrices.
pub fn symmetric_eigen<T: Scalar>(m: &DenseMatrix<T>) -> Result<SymmetricEigen<T>> {
    let n = m.rows();
    ensure_dim(n, m.cols())?;
    check_symmetric(m)?;
    let mut a = m.clone();
    let mut v = DenseMatrix::identity(n);
    let scale = a.max_abs();
    let tiny = T::epsilon() * T::epsilon() * scale * scale;

    for _ in 0..MAX_SWEEPS {
        let mut off = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off <= tiny {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    Ok(SymmetricEigen { values: (0..n).map(|i| a[(i, i)]).collect(), vectors: v })
}

fn check_symmetric<T: Scalar>(m: &DenseMatrix<T>) -> Result<()> {
    if !m.is_finite() {
        return Err(Error::NonFinite("matrix entry".into()));
    }
    let mut worst = T::zero();
    for i in 0..m.rows() {
        for j in (i + 1)..m.cols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if worst > T::lit(SYMMETRY_TOLERANCE) {
        return Err(Error::NotSymmetric(worst.as_f64()));
    }
    Ok(())
}

/// `M^(-1/2)` for symmetric positive-definite `M`, via eigendecomposition.
///
/// Eigenvalues below [`EIGENVALUE_FLOOR`] are reported, never clamped.
pub fn inv_sqrt_sym<T: Scalar>(m: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    let eig = symmetric_eigen(m)?;
    let floor = T::lit(EIGENVALUE_FLOOR);
    if let Some((index, &value)) =
        eig.values.iter().enumerate().min_by(|a, b| a.1.partial_cmp(b.1).expect("finite eigenvalues"))
    {
        if value < floor {
            return Err(Error::NearSingular { index, value: value.as_f64() });
        }
    }
    let n = m.rows();
    let inv_root: Vec<T> = eig.values.iter().map(|&l| T::one() / l.sqrt()).collect();
    let v = &eig.vectors;
    Ok(DenseMatrix::from_fn(n, n, |i, j| (0..n).fold(T::zero(), |acc, k| acc + v[(i, k)] * inv_root[k] * v[(j, k)])))
}

/// Projects `W` onto the set of matrices with orthonormal rows: `(W·Wᵀ)^(-1/2)·W`.
pub fn orthonormalize_rows<T: Scalar>(w: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    let g = w.gram_rows();
    inv_sqrt_sym(&g)?.matmul(w)
}
