//! Dense linear algebra: LU solves, smallest-`|Re λ|` eigenpairs, SVD and
//! null spaces, Gauss–Seidel and GMRES.

mod eigen;
mod iterative;
mod lu;
mod matrix;
mod qr;
mod svd;

pub use eigen::{
    eigenvalues, eigenvector_at, fix_sign, min_abs_real_eigenpair, min_abs_real_eigenpair_with, symmetric_eigen,
    EigenOptions, EigenPair,
};
pub use iterative::{gauss_seidel, gmres, IterativeSolveResult};
pub use lu::{solve_dense, Lu, SINGULAR_PIVOT};
pub use matrix::DenseMatrix;
pub use qr::{least_squares, pivoted_qr, rank_revealing_solve, PivotedQr};
pub use svd::{singular_values, svd_jacobi, Svd};

use crate::{lit, Scalar};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is singular to working precision (pivot {pivot})")]
    SingularMatrix { pivot: usize },
    #[error("iteration did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("iteration cap {cap} exceeded (best residual {best_residual:e})")]
    IterationCapExceeded { cap: usize, best_residual: f64, best: Vec<f64> },
    #[error("non-finite entries")]
    NonFinite,
}

pub(crate) fn to_f64_lossy<S: Scalar>(x: S) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[inline]
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(S::zero(), |s, (&x, &y)| s + x * y)
}

#[inline]
pub fn norm2<S: Scalar>(a: &[S]) -> S {
    // Scaled to avoid overflow on very large PDE states.
    let m = norm_inf(a);
    if m == S::zero() || !m.is_finite() {
        return m;
    }
    a.iter().map(|&x| (x / m) * (x / m)).sum::<S>().sqrt() * m
}

#[inline]
pub fn norm_inf<S: Scalar>(a: &[S]) -> S {
    a.iter().fold(S::zero(), |m, x| if x.is_nan() { S::nan() } else { m.max(x.abs()) })
}

/// `y += k x`.
#[inline]
pub fn axpy<S: Scalar>(k: S, x: &[S], y: &mut [S]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + k * xi;
    }
}

pub fn sub<S: Scalar>(a: &[S], b: &[S]) -> Vec<S> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn add<S: Scalar>(a: &[S], b: &[S]) -> Vec<S> {
    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
}

pub fn scale<S: Scalar>(k: S, a: &[S]) -> Vec<S> {
    a.iter().map(|&x| k * x).collect()
}

/// Normalizes in place; returns the original norm.
pub fn normalize<S: Scalar>(a: &mut [S]) -> S {
    let n = norm2(a);
    if n > S::zero() {
        for x in a.iter_mut() {
            *x = *x / n;
        }
    }
    n
}

/// How null-space rank is decided.
#[derive(Clone, Copy, Debug)]
pub struct RankCutoff<S> {
    /// Relative threshold.
    pub rel: S,
    /// Scale the threshold multiplies; `None` uses the largest singular value.
    pub reference: Option<S>,
}

impl<S: Scalar> Default for RankCutoff<S> {
    fn default() -> Self {
        Self { rel: lit(1e-8), reference: None }
    }
}

impl<S: Scalar> RankCutoff<S> {
    pub fn relative(rel: S) -> Self {
        Self { rel, reference: None }
    }

    fn threshold(&self, sigma_max: S) -> S {
        self.rel * self.reference.unwrap_or(sigma_max)
    }
}

/// Largest dimension handled by Jacobi SVD; bigger inputs use pivoted QR.
pub const SVD_LIMIT: usize = 200;

/// Orthonormal basis of `{x : A x = 0}` with the default cutoff `1e-8·σ_max`.
pub fn null_space<S: Scalar>(a: &DenseMatrix<S>) -> Vec<Vec<S>> {
    null_space_with(a, RankCutoff::default())
}

/// Orthonormal null-space basis. Rank is decided by singular values for
/// `min(m, n) ≤ 200` and by the diagonal of a column-pivoted QR above.
pub fn null_space_with<S: Scalar>(a: &DenseMatrix<S>, cutoff: RankCutoff<S>) -> Vec<Vec<S>> {
    let (m, n) = (a.rows(), a.cols());
    if m.min(n) <= SVD_LIMIT {
        if let Ok(svd) = svd_jacobi(a) {
            let smax = svd.sigma.first().copied().unwrap_or(S::zero());
            let thr = cutoff.threshold(smax);
            return (0..n).filter(|&k| svd.sigma[k] <= thr).map(|k| svd.v.column(k)).collect();
        }
    }
    qr_null_space(a, cutoff)
}

fn qr_null_space<S: Scalar>(a: &DenseMatrix<S>, cutoff: RankCutoff<S>) -> Vec<Vec<S>> {
    let (m, n) = (a.rows(), a.cols());
    let f = pivoted_qr(a);
    let rmax = if m.min(n) > 0 { f.r[(0, 0)].abs() } else { S::zero() };
    let thr = cutoff.threshold(rmax);
    let steps = m.min(n);
    let rank = (0..steps).take_while(|&k| f.r[(k, k)].abs() > thr).count();
    // Null basis P [−R11⁻¹ R12; I].
    let mut basis = Vec::new();
    for j in rank..n {
        let mut y = vec![S::zero(); n];
        y[j] = S::one();
        for i in (0..rank).rev() {
            let mut s = -f.r[(i, j)];
            for k in i + 1..rank {
                s = s - f.r[(i, k)] * y[k];
            }
            y[i] = s / f.r[(i, i)];
        }
        let mut x = vec![S::zero(); n];
        for (k, &p) in f.perm.iter().enumerate() {
            x[p] = y[k];
        }
        basis.push(x);
    }
    eigen_orthonormalize(&mut basis);
    basis
}

fn eigen_orthonormalize<S: Scalar>(cols: &mut [Vec<S>]) {
    eigen::orthonormalize(cols)
}

/// Orthonormal basis of `{y : Aᵀ y = 0}`.
pub fn left_null_space_with<S: Scalar>(a: &DenseMatrix<S>, cutoff: RankCutoff<S>) -> Vec<Vec<S>> {
    let (m, n) = (a.rows(), a.cols());
    if m.min(n) <= SVD_LIMIT {
        return null_space_with(&a.transpose(), cutoff);
    }
    let f = pivoted_qr(a);
    let rmax = f.r[(0, 0)].abs();
    let thr = cutoff.threshold(rmax);
    let rank = (0..m.min(n)).take_while(|&k| f.r[(k, k)].abs() > thr).count();
    (rank..m).map(|j| f.q.column(j)).collect()
}
