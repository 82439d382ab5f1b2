use super::{DenseMatrix, LinalgError};
use crate::{lit, Scalar};

/// Relative pivot threshold below which a matrix is reported singular.
pub const SINGULAR_PIVOT: f64 = 1e-14;

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Clone, Debug)]
pub struct Lu<S> {
    lu: DenseMatrix<S>,
    perm: Vec<usize>,
    parity: i8,
}

impl<S: Scalar> Lu<S> {
    /// Factors `a`; fails with `SingularMatrix` when a pivot drops below
    /// `1e-14 * ‖a‖∞`.
    pub fn factor(a: &DenseMatrix<S>) -> Result<Self, LinalgError> {
        Self::factor_with_threshold(a, lit(SINGULAR_PIVOT))
    }

    pub fn factor_with_threshold(a: &DenseMatrix<S>, rel: S) -> Result<Self, LinalgError> {
        if !a.is_square() {
            return Err(LinalgError::DimensionMismatch { expected: a.rows(), found: a.cols() });
        }
        if !a.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut parity = 1i8;
        let scale = a.norm_inf();
        let tiny = rel * scale;
        for k in 0..n {
            let mut piv = k;
            let mut best = lu[(k, k)].abs();
            for i in k + 1..n {
                let v = lu[(i, k)].abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best <= tiny || best == S::zero() {
                return Err(LinalgError::SingularMatrix { pivot: k });
            }
            if piv != k {
                lu.swap_rows(piv, k);
                perm.swap(piv, k);
                parity = -parity;
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f == S::zero() {
                    continue;
                }
                let (upper, lower) = lu.as_mut_slice().split_at_mut(i * n);
                let src = &upper[k * n + k + 1..k * n + n];
                let dst = &mut lower[k + 1..n];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d = *d - f * s;
                }
            }
        }
        Ok(Self { lu, perm, parity })
    }

    pub fn dim(&self) -> usize {
        self.lu.rows()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[S]) -> Vec<S> {
        let n = self.dim();
        assert_eq!(b.len(), n, "rhs dimension mismatch");
        let mut x: Vec<S> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let mut s = x[i];
            for j in 0..i {
                s = s - row[j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let mut s = x[i];
            for j in i + 1..n {
                s = s - row[j] * x[j];
            }
            x[i] = s / row[i];
        }
        x
    }

    /// Solves `Aᵀ x = b`.
    pub fn solve_transpose(&self, b: &[S]) -> Vec<S> {
        let n = self.dim();
        assert_eq!(b.len(), n, "rhs dimension mismatch");
        // Aᵀ = Uᵀ Lᵀ P, so solve Uᵀ y = b, Lᵀ z = y, x = Pᵀ z.
        let mut y = b.to_vec();
        for i in 0..n {
            y[i] = y[i] / self.lu[(i, i)];
            let yi = y[i];
            let row = self.lu.row(i);
            for j in i + 1..n {
                y[j] = y[j] - row[j] * yi;
            }
        }
        for i in (0..n).rev() {
            let yi = y[i];
            let row = self.lu.row(i);
            for j in 0..i {
                y[j] = y[j] - row[j] * yi;
            }
        }
        let mut x = vec![S::zero(); n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = y[k];
        }
        x
    }

    /// Sign of the determinant: `1` or `-1`.
    pub fn det_sign(&self) -> i8 {
        let mut s = self.parity;
        for i in 0..self.dim() {
            if self.lu[(i, i)] < S::zero() {
                s = -s;
            }
        }
        s
    }

    pub fn determinant(&self) -> S {
        let mut d = if self.parity > 0 { S::one() } else { -S::one() };
        for i in 0..self.dim() {
            d = d * self.lu[(i, i)];
        }
        d
    }

    /// Smallest `|u_kk|`, a cheap singularity indicator.
    pub fn min_abs_pivot(&self) -> S {
        (0..self.dim()).map(|i| self.lu[(i, i)].abs()).fold(S::infinity(), S::min)
    }
}

/// Solves `A x = b` by LU with partial pivoting.
pub fn solve_dense<S: Scalar>(a: &DenseMatrix<S>, b: &[S]) -> Result<Vec<S>, LinalgError> {
    if b.len() != a.rows() {
        return Err(LinalgError::DimensionMismatch { expected: a.rows(), found: b.len() });
    }
    Ok(Lu::factor(a)?.solve(b))
}
