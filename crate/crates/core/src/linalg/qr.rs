use super::{dot, norm2, DenseMatrix, LinalgError};
use crate::{lit, Scalar};

/// Householder QR with column pivoting, `A P = Q R`.
#[derive(Clone, Debug)]
pub struct PivotedQr<S> {
    /// Explicit `m × m` orthogonal factor.
    pub q: DenseMatrix<S>,
    /// `m × n` upper-trapezoidal factor.
    pub r: DenseMatrix<S>,
    /// `perm[k]` is the original column placed at position `k`.
    pub perm: Vec<usize>,
}

pub fn pivoted_qr<S: Scalar>(a: &DenseMatrix<S>) -> PivotedQr<S> {
    let (m, n) = (a.rows(), a.cols());
    // Column-major working copy.
    let mut cols = a.columns();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut reflectors: Vec<(usize, Vec<S>)> = Vec::new();
    let steps = m.min(n);
    for k in 0..steps {
        let mut best = k;
        let mut best_norm = S::zero();
        for j in k..n {
            let nj = norm2(&cols[j][k..]);
            if nj > best_norm {
                best_norm = nj;
                best = j;
            }
        }
        cols.swap(k, best);
        perm.swap(k, best);
        if best_norm == S::zero() {
            break;
        }
        let mut v: Vec<S> = cols[k][k..].to_vec();
        let alpha = if v[0] > S::zero() { -best_norm } else { best_norm };
        v[0] = v[0] - alpha;
        let vn = norm2(&v);
        if vn == S::zero() {
            continue;
        }
        for x in v.iter_mut() {
            *x = *x / vn;
        }
        for col in cols.iter_mut().skip(k) {
            let s = lit::<S>(2.0) * dot(&v, &col[k..]);
            for (c, &vi) in col[k..].iter_mut().zip(&v) {
                *c = *c - s * vi;
            }
        }
        for i in k + 1..m {
            cols[k][i] = S::zero();
        }
        reflectors.push((k, v));
    }
    let r = DenseMatrix::from_fn(m, n, |i, j| cols[j][i]);
    // Q = H_0 H_1 ... applied to the identity.
    let mut q = DenseMatrix::<S>::identity(m);
    for (k, v) in reflectors.iter().rev() {
        for j in 0..m {
            let mut s = S::zero();
            for (t, &vi) in v.iter().enumerate() {
                s = s + vi * q[(k + t, j)];
            }
            s = s * lit(2.0);
            for (t, &vi) in v.iter().enumerate() {
                q[(k + t, j)] = q[(k + t, j)] - s * vi;
            }
        }
    }
    PivotedQr { q, r, perm }
}

/// Least-squares solution of `A x ≈ b` (full column rank, `m ≥ n`) by
/// Householder QR. Returns the solution and the residual 2-norm.
pub fn least_squares<S: Scalar>(a: &DenseMatrix<S>, b: &[S]) -> Result<(Vec<S>, S), LinalgError> {
    let (m, n) = (a.rows(), a.cols());
    if b.len() != m {
        return Err(LinalgError::DimensionMismatch { expected: m, found: b.len() });
    }
    if m < n {
        return Err(LinalgError::DimensionMismatch { expected: n, found: m });
    }
    let mut cols = a.columns();
    let mut rhs = b.to_vec();
    for k in 0..n {
        let nk = norm2(&cols[k][k..]);
        if nk == S::zero() {
            return Err(LinalgError::SingularMatrix { pivot: k });
        }
        let mut v: Vec<S> = cols[k][k..].to_vec();
        let alpha = if v[0] > S::zero() { -nk } else { nk };
        v[0] = v[0] - alpha;
        let vn = norm2(&v);
        if vn > S::zero() {
            for x in v.iter_mut() {
                *x = *x / vn;
            }
            for col in cols.iter_mut().skip(k) {
                let s = lit::<S>(2.0) * dot(&v, &col[k..]);
                for (c, &vi) in col[k..].iter_mut().zip(&v) {
                    *c = *c - s * vi;
                }
            }
            let s = lit::<S>(2.0) * dot(&v, &rhs[k..]);
            for (c, &vi) in rhs[k..].iter_mut().zip(&v) {
                *c = *c - s * vi;
            }
        }
    }
    let mut x = vec![S::zero(); n];
    for i in (0..n).rev() {
        let mut s = rhs[i];
        for j in i + 1..n {
            s = s - cols[j][i] * x[j];
        }
        if cols[i][i] == S::zero() {
            return Err(LinalgError::SingularMatrix { pivot: i });
        }
        x[i] = s / cols[i][i];
    }
    let res = norm2(&rhs[n..]);
    Ok((x, res))
}

/// Basic solution of `A x ≈ b` from a column-pivoted QR, treating diagonal
/// entries of `R` below `rel·|R₀₀|` as zero. Returns the solution and the
/// numerical rank.
pub fn rank_revealing_solve<S: Scalar>(a: &DenseMatrix<S>, b: &[S], rel: S) -> Result<(Vec<S>, usize), LinalgError> {
    let (m, n) = (a.rows(), a.cols());
    if b.len() != m {
        return Err(LinalgError::DimensionMismatch { expected: m, found: b.len() });
    }
    let f = pivoted_qr(a);
    let steps = m.min(n);
    let rmax = if steps > 0 { f.r[(0, 0)].abs() } else { S::zero() };
    let rank = (0..steps).take_while(|&k| f.r[(k, k)].abs() > rel * rmax).count();
    let qtb = f.q.tr_matvec(b);
    let mut y = vec![S::zero(); n];
    for i in (0..rank).rev() {
        let mut s = qtb[i];
        for k in i + 1..rank {
            s = s - f.r[(i, k)] * y[k];
        }
        y[i] = s / f.r[(i, i)];
    }
    let mut x = vec![S::zero(); n];
    for (k, &p) in f.perm.iter().enumerate() {
        x[p] = y[k];
    }
    Ok((x, rank))
}
