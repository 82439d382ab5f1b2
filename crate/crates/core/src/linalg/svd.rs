use super::{dot, DenseMatrix, LinalgError};
use crate::{lit, Scalar};

/// Singular value decomposition `A = U Σ Vᵀ` from one-sided Jacobi.
///
/// `u` is `m × n` (columns for zero singular values are zero), `v` is the
/// full `n × n` orthogonal factor; values are sorted descending.
#[derive(Clone, Debug)]
pub struct Svd<S> {
    pub u: DenseMatrix<S>,
    pub sigma: Vec<S>,
    pub v: DenseMatrix<S>,
}

/// One-sided (Hestenes) Jacobi SVD. Works for any shape; cost grows like
/// `n² m` per sweep, so it is meant for moderate sizes.
pub fn svd_jacobi<S: Scalar>(a: &DenseMatrix<S>) -> Result<Svd<S>, LinalgError> {
    let (m, n) = (a.rows(), a.cols());
    let mut cols = a.columns();
    let mut v: Vec<Vec<S>> = (0..n)
        .map(|j| {
            let mut e = vec![S::zero(); n];
            e[j] = S::one();
            e
        })
        .collect();
    let eps = S::epsilon();
    let mut converged = false;
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == S::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (lit::<S>(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (S::one() + zeta * zeta).sqrt());
                let c = S::one() / (S::one() + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(LinalgError::NoConvergence { iterations: 80 });
    }
    let mut sigma: Vec<S> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).unwrap_or(std::cmp::Ordering::Equal));
    let mut u = DenseMatrix::zeros(m, n);
    let mut vm = DenseMatrix::zeros(n, n);
    for (k, &j) in order.iter().enumerate() {
        let s = sigma[j];
        for i in 0..m {
            u[(i, k)] = if s > S::zero() { cols[j][i] / s } else { S::zero() };
        }
        for i in 0..n {
            vm[(i, k)] = v[j][i];
        }
    }
    sigma = order.iter().map(|&j| sigma[j]).collect();
    Ok(Svd { u, sigma, v: vm })
}

fn rotate<S: Scalar>(cols: &mut [Vec<S>], p: usize, q: usize, c: S, s: S) {
    let (lo, hi) = cols.split_at_mut(q);
    for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Singular values only, descending.
pub fn singular_values<S: Scalar>(a: &DenseMatrix<S>) -> Result<Vec<S>, LinalgError> {
    // Jacobi cost is driven by the column count, so work on the thinner side.
    if a.cols() > a.rows() {
        Ok(svd_jacobi(&a.transpose())?.sigma)
    } else {
        Ok(svd_jacobi(a)?.sigma)
    }
}
