use super::{axpy, dot, norm2, DenseMatrix, LinalgError};
use crate::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct IterativeSolveResult<S> {
    pub solution: Vec<S>,
    pub iterations: usize,
    pub final_residual: S,
}

/// Forward Gauss–Seidel: one sweep updates components `0..n` in order and
/// counts as one iteration. Stops when `‖residual_matrix·x − b‖₂ ≤ tol`.
///
/// `residual_matrix` is usually `m` itself; it is separate so a caller can
/// measure convergence against a different operator than the one iterated.
pub fn gauss_seidel<S: Scalar>(
    m: &DenseMatrix<S>,
    b: &[S],
    x0: &[S],
    residual_matrix: &DenseMatrix<S>,
    tol: S,
    cap: usize,
) -> Result<IterativeSolveResult<S>, LinalgError> {
    let n = m.rows();
    if !m.is_square() || b.len() != n || x0.len() != n {
        return Err(LinalgError::DimensionMismatch { expected: n, found: b.len().min(x0.len()) });
    }
    if residual_matrix.rows() != n || residual_matrix.cols() != n {
        return Err(LinalgError::DimensionMismatch { expected: n, found: residual_matrix.rows() });
    }
    let residual = |x: &[S]| -> S {
        let mut r = residual_matrix.matvec(x);
        for (ri, &bi) in r.iter_mut().zip(b) {
            *ri = *ri - bi;
        }
        norm2(&r)
    };
    let mut x = x0.to_vec();
    let mut res = residual(&x);
    if res <= tol {
        return Ok(IterativeSolveResult { solution: x, iterations: 0, final_residual: res });
    }
    let mut best = (x.clone(), res);
    for it in 1..=cap {
        for i in 0..n {
            let row = m.row(i);
            let d = row[i];
            if d == S::zero() {
                continue;
            }
            let mut s = b[i];
            for (j, &a) in row.iter().enumerate() {
                if j != i {
                    s = s - a * x[j];
                }
            }
            x[i] = s / d;
        }
        res = residual(&x);
        if !res.is_finite() {
            break;
        }
        if res < best.1 {
            best = (x.clone(), res);
        }
        if res <= tol {
            return Ok(IterativeSolveResult { solution: x, iterations: it, final_residual: res });
        }
    }
    Err(LinalgError::IterationCapExceeded {
        cap,
        best_residual: super::to_f64_lossy(best.1),
        best: best.0.iter().map(|&v| super::to_f64_lossy(v)).collect(),
    })
}

/// Restarted GMRES with right preconditioning `A M⁻¹ y = b`, `x = M⁻¹ y`.
/// Stops when `‖b − A x‖ ≤ rel_tol·‖b‖`.
pub fn gmres<S: Scalar>(
    apply_a: impl Fn(&[S]) -> Vec<S>,
    apply_prec: impl Fn(&[S]) -> Vec<S>,
    b: &[S],
    x0: &[S],
    rel_tol: S,
    restart: usize,
    max_iter: usize,
) -> Result<IterativeSolveResult<S>, LinalgError> {
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = x0.to_vec();
    if bnorm == S::zero() {
        return Ok(IterativeSolveResult { solution: vec![S::zero(); n], iterations: 0, final_residual: S::zero() });
    }
    let target = rel_tol * bnorm;
    let restart = restart.max(1);
    let mut total = 0;
    loop {
        let ax = apply_a(&x);
        let r: Vec<S> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
        let beta = norm2(&r);
        if beta <= target {
            return Ok(IterativeSolveResult { solution: x, iterations: total, final_residual: beta });
        }
        if total >= max_iter {
            return Err(LinalgError::IterationCapExceeded {
                cap: max_iter,
                best_residual: super::to_f64_lossy(beta),
                best: x.iter().map(|&v| super::to_f64_lossy(v)).collect(),
            });
        }
        let mut basis: Vec<Vec<S>> = vec![r.iter().map(|&v| v / beta).collect()];
        let mut hess: Vec<Vec<S>> = Vec::new();
        let mut cs: Vec<(S, S)> = Vec::new();
        let mut g = vec![beta];
        let mut k = 0;
        while k < restart && total < max_iter {
            let z = apply_prec(&basis[k]);
            let mut w = apply_a(&z);
            let mut col = Vec::with_capacity(k + 2);
            for q in &basis {
                let h = dot(&w, q);
                axpy(-h, q, &mut w);
                col.push(h);
            }
            let hn = norm2(&w);
            col.push(hn);
            for (i, &(c, s)) in cs.iter().enumerate() {
                let (a, bb) = (col[i], col[i + 1]);
                col[i] = c * a + s * bb;
                col[i + 1] = -s * a + c * bb;
            }
            let (a, bb) = (col[k], col[k + 1]);
            let d = (a * a + bb * bb).sqrt();
            let (c, s) = if d == S::zero() { (S::one(), S::zero()) } else { (a / d, bb / d) };
            col[k] = d;
            col[k + 1] = S::zero();
            cs.push((c, s));
            let gk = g[k];
            g[k] = c * gk;
            g.push(-s * gk);
            hess.push(col);
            total += 1;
            k += 1;
            if g[k].abs() <= target || hn == S::zero() {
                break;
            }
            basis.push(w.iter().map(|&v| v / hn).collect());
        }
        let mut y = vec![S::zero(); k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s = s - hess[j][i] * y[j];
            }
            y[i] = if hess[i][i] == S::zero() { S::zero() } else { s / hess[i][i] };
        }
        let mut dy = vec![S::zero(); n];
        for (j, &yj) in y.iter().enumerate() {
            axpy(yj, &basis[j], &mut dy);
        }
        let dx = apply_prec(&dy);
        axpy(S::one(), &dx, &mut x);
        if !norm2(&x).is_finite() {
            return Err(LinalgError::NonFinite);
        }
    }
}
