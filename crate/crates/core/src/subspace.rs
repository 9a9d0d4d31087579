//! Linear subspaces of `R^N` and the invariant subspace algorithm.
//!
//! A [`Subspace`] is stored as a basis matrix whose columns span it. The
//! exact backend keeps the reduced column-echelon basis, the float backend
//! an orthonormal one, so two equal subspaces always carry the same basis
//! (exactly, or to rounding).

use thiserror::Error;

use crate::matrix::{norm2, Matrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SubspaceError {
    #[error("dimension mismatch: expected ambient dimension {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invariant subspace iteration did not stabilise after {iterations} steps (dimension {dim})")]
    NoConvergence { iterations: usize, dim: usize },
    #[error("invariant subspace iteration grew from dimension {from} to {to}")]
    NonMonotone { from: usize, to: usize },
}

/// Rank and membership thresholds. Both are zero for the exact backend.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tolerance {
    /// Singular values below `rank_rel_tol * max(sigma_max, 1)` count as zero.
    pub rank_rel_tol: f64,
    /// `x` lies in `U` when `|x - P_U x| <= membership_tol * max(|x|, 1)`.
    pub membership_tol: f64,
}

impl Tolerance {
    pub const fn exact() -> Self {
        Self { rank_rel_tol: 0.0, membership_tol: 0.0 }
    }

    pub const fn float() -> Self {
        Self { rank_rel_tol: 1e-9, membership_tol: 1e-8 }
    }

    /// Default tolerance for backend `S`.
    pub fn default_for<S: Scalar>() -> Self {
        if S::EXACT {
            Self::exact()
        } else {
            Self::float()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subspace<S> {
    ambient: usize,
    basis: Matrix<S>,
}

impl<S: Scalar> Subspace<S> {
    pub fn zero(ambient: usize) -> Self {
        Self { ambient, basis: Matrix::zeros(ambient, 0) }
    }

    pub fn full(ambient: usize) -> Self {
        Self { ambient, basis: Matrix::identity(ambient) }
    }

    /// Span of the columns of `m`.
    pub fn image(m: &Matrix<S>, tol: &Tolerance) -> Self {
        Self { ambient: m.rows(), basis: S::image_basis(m, tol) }
    }

    /// Null space of `m`, a subspace of `R^{cols(m)}`.
    pub fn kernel(m: &Matrix<S>, tol: &Tolerance) -> Self {
        Self { ambient: m.cols(), basis: S::kernel_basis(m, tol) }
    }

    /// Span of the given vectors of length `ambient`.
    pub fn span(ambient: usize, vectors: &[Vec<S>], tol: &Tolerance) -> Self {
        Self::image(&Matrix::from_columns(ambient, vectors), tol)
    }

    /// Span of the unit vectors `e_i` for the given zero-based indices.
    pub fn coordinate(ambient: usize, indices: &[usize], tol: &Tolerance) -> Self {
        let vectors: Vec<Vec<S>> = indices
            .iter()
            .map(|&i| (0..ambient).map(|j| if i == j { S::one() } else { S::zero() }).collect())
            .collect();
        Self::span(ambient, &vectors, tol)
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.basis.cols()
    }

    pub fn is_zero(&self) -> bool {
        self.dim() == 0
    }

    pub fn basis(&self) -> &Matrix<S> {
        &self.basis
    }

    pub fn basis_vectors(&self) -> Vec<Vec<S>> {
        self.basis.columns()
    }

    fn check(&self, other: usize) -> Result<(), SubspaceError> {
        if self.ambient == other {
            Ok(())
        } else {
            Err(SubspaceError::DimensionMismatch { expected: self.ambient, found: other })
        }
    }

    pub fn sum(&self, other: &Self, tol: &Tolerance) -> Result<Self, SubspaceError> {
        self.check(other.ambient)?;
        if other.is_zero() {
            return Ok(self.clone());
        }
        if self.is_zero() {
            return Ok(other.clone());
        }
        Ok(Self::image(&self.basis.hstack(&other.basis), tol))
    }

    pub fn intersect(&self, other: &Self, tol: &Tolerance) -> Result<Self, SubspaceError> {
        self.check(other.ambient)?;
        if self.is_zero() || other.is_zero() {
            return Ok(Self::zero(self.ambient));
        }
        let n = self.ambient;
        let id = Matrix::identity(n);
        let stacked = id.sub(&self.projector()).vstack(&id.sub(&other.projector()));
        Ok(Self::kernel(&stacked, tol))
    }

    /// `{v : m v in s}`.
    pub fn preimage(m: &Matrix<S>, s: &Self, tol: &Tolerance) -> Result<Self, SubspaceError> {
        s.check(m.rows())?;
        if s.dim() == s.ambient {
            return Ok(Self::full(m.cols()));
        }
        let comp = Matrix::identity(s.ambient).sub(&s.projector());
        Ok(Self::kernel(&comp.matmul(m), tol))
    }

    /// `m(self)`, a subspace of `R^{rows(m)}`.
    pub fn map(&self, m: &Matrix<S>, tol: &Tolerance) -> Result<Self, SubspaceError> {
        self.check(m.cols())?;
        if self.is_zero() {
            return Ok(Self::zero(m.rows()));
        }
        Ok(Self::image(&m.matmul(&self.basis), tol))
    }

    /// Orthogonal projector onto the subspace.
    pub fn projector(&self) -> Matrix<S> {
        if self.is_zero() {
            return Matrix::zeros(self.ambient, self.ambient);
        }
        let b = &self.basis;
        let bt = b.transpose();
        if S::EXACT {
            let gram_inv = bt.matmul(b).inverse().expect("basis columns are independent");
            b.matmul(&gram_inv).matmul(&bt)
        } else {
            b.matmul(&bt)
        }
    }

    pub fn contains_vector(&self, x: &[S], tol: &Tolerance) -> bool {
        assert_eq!(x.len(), self.ambient, "vector length mismatch");
        let px = self.projector().mul_vec(x);
        let diff: Vec<S> = x.iter().zip(&px).map(|(a, b)| a.clone() - b.clone()).collect();
        if S::EXACT {
            diff.iter().all(num_traits::Zero::is_zero)
        } else {
            norm2(&diff) <= tol.membership_tol * norm2(x).max(1.0)
        }
    }

    /// True when `other` is a subspace of `self`.
    pub fn contains(&self, other: &Self, tol: &Tolerance) -> Result<bool, SubspaceError> {
        self.check(other.ambient)?;
        if other.dim() > self.dim() {
            return Ok(false);
        }
        Ok(other.basis_vectors().iter().all(|b| self.contains_vector(b, tol)))
    }

    pub fn equals(&self, other: &Self, tol: &Tolerance) -> Result<bool, SubspaceError> {
        Ok(self.dim() == other.dim() && self.contains(other, tol)?)
    }

    /// Float copy with an orthonormal basis.
    pub fn to_f64(&self) -> Subspace<f64> {
        Subspace::image(&self.basis.to_f64(), &Tolerance::float())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "dim": self.dim(),
            "basis": self.basis_vectors().iter().map(|v| crate::matrix::vec_to_json(v)).collect::<Vec<_>>(),
        })
    }

    /// Largest subspace `V` of `k` with `a V` inside `V + sum_i Im c_i`.
    ///
    /// Runs `V_0 = k`, `V_{j+1} = V_j ∩ a^{-1}(V_j + W)` with `W = sum_i Im c_i`
    /// until the dimension stops dropping.
    pub fn largest_invariant(
        a: &Matrix<S>,
        cs: &[Matrix<S>],
        k: &Self,
        tol: &Tolerance,
    ) -> Result<Self, SubspaceError> {
        let n = k.ambient;
        if a.rows() != n || a.cols() != n {
            return Err(SubspaceError::DimensionMismatch { expected: n, found: a.rows().max(a.cols()) });
        }
        let mut w = Self::zero(n);
        for c in cs {
            w = w.sum(&Self::image(c, tol), tol)?;
        }
        let mut v = k.clone();
        let cap = k.dim() + 1;
        for _ in 0..cap {
            if v.is_zero() {
                return Ok(v);
            }
            let target = v.sum(&w, tol)?;
            let next = v.intersect(&Self::preimage(a, &target, tol)?, tol)?;
            if next.dim() > v.dim() {
                return Err(SubspaceError::NonMonotone { from: v.dim(), to: next.dim() });
            }
            if next.dim() == v.dim() {
                return Ok(v);
            }
            v = next;
        }
        Err(SubspaceError::NoConvergence { iterations: cap, dim: v.dim() })
    }

    /// True when `a V` lies in `V + sum_i Im c_i`.
    pub fn is_invariant(&self, a: &Matrix<S>, cs: &[Matrix<S>], tol: &Tolerance) -> Result<bool, SubspaceError> {
        let mut target = self.clone();
        for c in cs {
            target = target.sum(&Self::image(c, tol), tol)?;
        }
        let av = self.map(a, tol)?;
        target.contains(&av, tol)
    }
}

/// Exact kernels over the rationals by row reduction.
pub mod exact {
    use num_traits::{One, Zero};

    use crate::matrix::Matrix;
    use crate::scalar::Rational;

    /// Reduced row echelon form and the pivot columns.
    pub fn rref(m: &Matrix<Rational>) -> (Matrix<Rational>, Vec<usize>) {
        let mut r = m.clone();
        let (rows, cols) = r.shape();
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..cols {
            if row == rows {
                break;
            }
            let Some(p) = (row..rows).find(|&i| !r[(i, col)].is_zero()) else {
                continue;
            };
            r.swap_rows(row, p);
            let inv = Rational::one() / r[(row, col)].clone();
            for j in col..cols {
                r[(row, j)] = r[(row, j)].clone() * inv.clone();
            }
            for i in 0..rows {
                if i == row || r[(i, col)].is_zero() {
                    continue;
                }
                let f = r[(i, col)].clone();
                for j in col..cols {
                    if !r[(row, j)].is_zero() {
                        r[(i, j)] = r[(i, j)].clone() - f.clone() * r[(row, j)].clone();
                    }
                }
            }
            pivots.push(col);
            row += 1;
        }
        (r, pivots)
    }

    /// Reduced column-echelon basis of the column space.
    pub fn image(m: &Matrix<Rational>) -> Matrix<Rational> {
        if m.cols() == 0 {
            return Matrix::zeros(m.rows(), 0);
        }
        let (r, pivots) = rref(&m.transpose());
        r.submatrix(0..pivots.len(), 0..m.rows()).transpose()
    }

    pub fn kernel(m: &Matrix<Rational>) -> Matrix<Rational> {
        let cols = m.cols();
        let (r, pivots) = rref(m);
        let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
        let vectors: Vec<Vec<Rational>> = free
            .iter()
            .map(|&f| {
                let mut v = vec![Rational::zero(); cols];
                v[f] = Rational::one();
                for (i, &p) in pivots.iter().enumerate() {
                    v[p] = -r[(i, f)].clone();
                }
                v
            })
            .collect();
        image(&Matrix::from_columns(cols, &vectors))
    }

    /// Minimum-norm solution of `m x = rhs`, `None` when inconsistent.
    pub fn least_norm_solve(m: &Matrix<Rational>, rhs: &[Rational]) -> Option<Vec<Rational>> {
        let (rows, cols) = m.shape();
        assert_eq!(rhs.len(), rows, "right-hand side length mismatch");
        let aug = m.hstack(&Matrix::from_columns(rows, &[rhs.to_vec()]));
        let (r, pivots) = rref(&aug);
        if pivots.last() == Some(&cols) {
            return None;
        }
        let mut x = vec![Rational::zero(); cols];
        for (i, &p) in pivots.iter().enumerate() {
            x[p] = r[(i, cols)].clone();
        }
        // Remove the null-space component to get the minimum-norm solution.
        let k = super::Subspace { ambient: cols, basis: kernel(m) };
        let pk = k.projector().mul_vec(&x);
        Some(x.iter().zip(&pk).map(|(a, b)| a.clone() - b.clone()).collect())
    }
}

/// Float kernels via the singular value decomposition.
pub mod float {
    use nalgebra::DMatrix;

    use super::Tolerance;
    use crate::matrix::Matrix;

    struct Svd {
        u: DMatrix<f64>,
        sigma: Vec<f64>,
        v_t: DMatrix<f64>,
        rank: usize,
    }

    fn svd(m: &Matrix<f64>, tol: &Tolerance) -> Svd {
        let (rows, cols) = m.shape();
        // Pad to at least square so that v_t spans the whole domain.
        let padded_rows = rows.max(cols);
        let mut d = DMatrix::<f64>::zeros(padded_rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                d[(i, j)] = m[(i, j)];
            }
        }
        let s = d.svd(true, true);
        let sigma: Vec<f64> = s.singular_values.iter().copied().collect();
        let smax = sigma.first().copied().unwrap_or(0.0);
        let threshold = tol.rank_rel_tol * smax.max(1.0);
        let rank = sigma.iter().filter(|&&x| x > threshold).count();
        Svd { u: s.u.expect("u requested"), sigma, v_t: s.v_t.expect("v_t requested"), rank }
    }

    pub fn kernel(m: &Matrix<f64>, tol: &Tolerance) -> Matrix<f64> {
        let (rows, cols) = m.shape();
        if cols == 0 {
            return Matrix::zeros(0, 0);
        }
        if rows == 0 {
            return Matrix::identity(cols);
        }
        let s = svd(m, tol);
        let mut out = Matrix::zeros(cols, cols - s.rank);
        for (k, i) in (s.rank..cols).enumerate() {
            for j in 0..cols {
                out[(j, k)] = s.v_t[(i, j)];
            }
        }
        out
    }

    pub fn image(m: &Matrix<f64>, tol: &Tolerance) -> Matrix<f64> {
        let (rows, cols) = m.shape();
        if rows == 0 || cols == 0 {
            return Matrix::zeros(rows, 0);
        }
        let s = svd(m, tol);
        let mut out = Matrix::zeros(rows, s.rank);
        for k in 0..s.rank {
            for i in 0..rows {
                out[(i, k)] = s.u[(i, k)];
            }
        }
        out
    }

    pub fn least_norm_solve(m: &Matrix<f64>, rhs: &[f64], tol: &Tolerance) -> Option<Vec<f64>> {
        let (rows, cols) = m.shape();
        assert_eq!(rhs.len(), rows, "right-hand side length mismatch");
        if cols == 0 {
            return rhs.iter().all(|&b| b.abs() <= tol.membership_tol).then(Vec::new);
        }
        let s = svd(m, tol);
        let mut x = vec![0.0; cols];
        for k in 0..s.rank {
            let coef: f64 = (0..rows).map(|i| s.u[(i, k)] * rhs[i]).sum::<f64>() / s.sigma[k];
            for (j, xj) in x.iter_mut().enumerate() {
                *xj += coef * s.v_t[(k, j)];
            }
        }
        let mx = m.mul_vec(&x);
        let resid = mx.iter().zip(rhs).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let bnorm = rhs.iter().map(|b| b * b).sum::<f64>().sqrt();
        let xnorm = x.iter().map(|b| b * b).sum::<f64>().sqrt();
        let scale = bnorm.max(m.frobenius_norm() * xnorm).max(1.0);
        (resid <= tol.membership_tol * scale).then_some(x)
    }
}
