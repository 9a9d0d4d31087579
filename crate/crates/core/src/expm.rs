//! Matrix exponentials.

use nalgebra::DMatrix;

use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Truncation degree used for exact-backend exponentials.
pub const SERIES_DEGREE: usize = 20;

/// `exp(m)` by scaling and squaring with a degree-13 Padé approximant.
pub fn expm_pade(m: &Matrix<f64>) -> Matrix<f64> {
    assert!(m.is_square(), "expm needs a square matrix");
    let n = m.rows();
    if n == 0 {
        return Matrix::zeros(0, 0);
    }
    let d = DMatrix::from_row_slice(n, n, m.data());
    let e = d.exp();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = e[(i, j)];
        }
    }
    out
}

/// Truncated Taylor series `sum_{k<=degree} m^k / k!` and a bound on the
/// 1-norm of the remainder, `|m|^(d+1) / (d+1)! * exp(|m|)`.
pub fn expm_series<S: Scalar>(m: &Matrix<S>, degree: usize) -> (Matrix<S>, f64) {
    assert!(m.is_square(), "expm needs a square matrix");
    let n = m.rows();
    let mut sum = Matrix::identity(n);
    if m.is_zero() {
        return (sum, 0.0);
    }
    let mut term = Matrix::identity(n);
    for k in 1..=degree {
        term = term.matmul(m).scale(&(S::one() / S::from_i64(k as i64)));
        if term.is_zero() {
            return (sum, 0.0);
        }
        sum = sum.add(&term);
    }
    let norm = m.norm1();
    let mut bound = norm.exp();
    for k in 1..=degree + 1 {
        bound *= norm / k as f64;
    }
    (sum, bound)
}
