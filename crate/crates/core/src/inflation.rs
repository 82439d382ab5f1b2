//! Inflated Newton corrector for nearly singular Jacobians.
//!
//! Instead of `J Δu = −F` the corrector solves the singular but consistent
//! symmetric system
//!
//! ```text
//! [ JᵀJ     JᵀJ v ] [Δũ]     [ JᵀF   ]
//! [ vᵀJᵀJ   λ     ] [α ]  = −[ vᵀJᵀF ]
//! ```
//!
//! where `(λ, v)` is the smallest eigenpair of `JᵀJ`, and recovers
//! `Δu = Δũ + α v`. `(v, −1)` spans the extra kernel direction, so `Δu` does
//! not depend on which solution the iterative method lands on.

use crate::linalg::{
    dot, gauss_seidel, min_abs_real_eigenpair, norm2, rank_revealing_solve, svd_jacobi, DenseMatrix, LinalgError,
    SVD_LIMIT,
};
use crate::model::{evaluate, jacobian_u, ModelError, ParametricSystem};
use crate::{lit, Scalar};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum InflationError {
    #[error("eigen solve of JᵀJ failed: {0}")]
    EigenFailure(LinalgError),
    #[error("inflated solve did not reach tolerance: {0}")]
    IterationCapExceeded(LinalgError),
    #[error("inflated Newton did not converge after {iterations} iterations (best residual {best_residual:e})")]
    NoConvergence { iterations: usize, best_residual: f64, best: Vec<f64> },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct InflatedSystem<S> {
    pub matrix: DenseMatrix<S>,
    pub rhs: Vec<S>,
    pub v: Vec<S>,
    pub lambda_min: S,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InflationUpdate<S> {
    pub delta_u_tilde: Vec<S>,
    pub alpha: S,
    pub delta_u: Vec<S>,
    pub iterations: usize,
}

impl<S: Scalar> InflationUpdate<S> {
    /// Splits a raw `(Δũ, α)` solution of the inflated system.
    pub fn from_raw(raw: &[S], v: &[S], iterations: usize) -> Self {
        let n = v.len();
        let alpha = raw[n];
        let delta_u_tilde = raw[..n].to_vec();
        let delta_u = delta_u_tilde.iter().zip(v).map(|(&d, &vi)| d + alpha * vi).collect();
        Self { delta_u_tilde, alpha, delta_u, iterations }
    }
}

/// Smallest eigenpair of `JᵀJ`: `σ_min²` and the right singular vector for
/// small `n`, inverse iteration on the Gram matrix above.
fn min_gram_eigenpair<S: Scalar>(j: &DenseMatrix<S>, gram: &DenseMatrix<S>) -> Result<(S, Vec<S>), LinalgError> {
    let n = j.cols();
    if n <= SVD_LIMIT {
        let svd = svd_jacobi(j)?;
        let k = n - 1;
        let s = svd.sigma[k];
        return Ok((s * s, svd.v.column(k)));
    }
    let pair = min_abs_real_eigenpair(gram)?;
    Ok((pair.re.abs(), pair.direction()))
}

pub fn assemble_inflated<S: Scalar>(j: &DenseMatrix<S>, f_val: &[S]) -> Result<InflatedSystem<S>, InflationError> {
    let n = j.rows();
    if !j.is_square() || f_val.len() != n {
        return Err(InflationError::EigenFailure(LinalgError::DimensionMismatch { expected: n, found: f_val.len() }));
    }
    let gram = j.gram();
    let (_, v) = min_gram_eigenpair(j, &gram).map_err(InflationError::EigenFailure)?;
    let gv = gram.matvec(&v);
    // Rayleigh quotient keeps the assembled matrix exactly BᵀB with B = [J, Jv].
    let lambda_min = dot(&v, &gv);
    let mut matrix = DenseMatrix::zeros(n + 1, n + 1);
    for r in 0..n {
        matrix.row_mut(r)[..n].copy_from_slice(gram.row(r));
        matrix[(r, n)] = gv[r];
        matrix[(n, r)] = gv[r];
    }
    matrix[(n, n)] = lambda_min;
    let jtf = j.tr_matvec(f_val);
    let mut rhs: Vec<S> = jtf.iter().map(|&x| -x).collect();
    rhs.push(-dot(&v, &jtf));
    Ok(InflatedSystem { matrix, rhs, v, lambda_min })
}

/// Gauss–Seidel from a zero start until `‖M x − b‖₂ ≤ tol`.
pub fn solve_inflated<S: Scalar>(sys: &InflatedSystem<S>, tol: S, cap: usize) -> Result<InflationUpdate<S>, InflationError> {
    let n1 = sys.rhs.len();
    let x0 = vec![S::zero(); n1];
    let out = gauss_seidel(&sys.matrix, &sys.rhs, &x0, &sys.matrix, tol, cap).map_err(InflationError::IterationCapExceeded)?;
    Ok(InflationUpdate::from_raw(&out.solution, &sys.v, out.iterations))
}

#[derive(Clone, Debug)]
pub struct InflationConfig<S> {
    pub newton_tol: S,
    pub newton_cap: usize,
    /// Relative residual target for each inner solve.
    pub inner_rel_tol: S,
    /// Upper bound on Gauss–Seidel sweeps; the effective cap also shrinks with `n²`.
    pub inner_cap: usize,
}

impl<S: Scalar> Default for InflationConfig<S> {
    fn default() -> Self {
        Self { newton_tol: lit(1e-10), newton_cap: 50, inner_rel_tol: lit(1e-10), inner_cap: 5000 }
    }
}

impl<S: Scalar> InflationConfig<S> {
    fn sweep_cap(&self, n: usize) -> usize {
        let budget = 20_000_000 / ((n + 1) * (n + 1)).max(1);
        self.inner_cap.min(budget.max(50))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InflatedNewtonResult<S> {
    pub u: Vec<S>,
    pub iterations: usize,
    pub residual: S,
    /// Inner solves that hit the sweep cap (or whose eigen solve failed) and
    /// fell back to a rank-revealing QR solve.
    pub direct_fallbacks: usize,
}

/// Newton corrector at fixed `p` whose linear solves go through the inflated system.
pub fn inflated_newton<S: Scalar>(
    sys: &dyn ParametricSystem<S>,
    u: &[S],
    p: S,
    config: &InflationConfig<S>,
) -> Result<InflatedNewtonResult<S>, InflationError> {
    let mut u = u.to_vec();
    let mut f = evaluate(sys, &u, p)?;
    let mut r = norm2(&f);
    let mut best = (u.clone(), r);
    let mut fallbacks = 0;
    for it in 0..=config.newton_cap {
        if r <= config.newton_tol {
            return Ok(InflatedNewtonResult { u, iterations: it, residual: r, direct_fallbacks: fallbacks });
        }
        if it == config.newton_cap || !r.is_finite() {
            break;
        }
        let j = jacobian_u(sys, &u, p)?;
        let solved = assemble_inflated(&j, &f).and_then(|inflated| {
            let tol = config.inner_rel_tol * norm2(&inflated.rhs);
            solve_inflated(&inflated, tol, config.sweep_cap(u.len()))
        });
        let du = match solved {
            Ok(up) => up.delta_u,
            Err(InflationError::IterationCapExceeded(_) | InflationError::EigenFailure(_)) => {
                fallbacks += 1;
                let neg: Vec<S> = f.iter().map(|&x| -x).collect();
                rank_revealing_solve(&j, &neg, lit(1e-12)).map_err(InflationError::EigenFailure)?.0
            }
            Err(e) => return Err(e),
        };
        for (a, d) in u.iter_mut().zip(&du) {
            *a = *a + *d;
        }
        f = evaluate(sys, &u, p)?;
        r = norm2(&f);
        if r < best.1 {
            best = (u.clone(), r);
        }
    }
    Err(InflationError::NoConvergence {
        iterations: config.newton_cap,
        best_residual: crate::to_f64(best.1),
        best: best.0.iter().map(|&x| crate::to_f64(x)).collect(),
    })
}
