//! Parametric systems `F(u, p) = 0` and the analytic test problems.

use crate::linalg::{norm2, norm_inf, DenseMatrix, Lu};
use crate::{lit, Scalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: system has n = {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unknown problem `{0}`; known problems: {known}", known = PROBLEM_NAMES.join(", "))]
    UnknownProblem(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("Newton failed: {0}")]
    NewtonFailed(String),
}

/// `F: Rⁿ × R → Rⁿ`. Analytic Jacobians are optional; [`jacobian_u`] and
/// [`jacobian_p`] fall back to central differences.
pub trait ParametricSystem<S: Scalar>: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    /// Writes `F(u, p)` into `out` (both of length `dim()`).
    fn eval_into(&self, u: &[S], p: S, out: &mut [S]);
    fn analytic_jacobian_u(&self, _u: &[S], _p: S) -> Option<DenseMatrix<S>> {
        None
    }
    fn analytic_jacobian_p(&self, _u: &[S], _p: S) -> Option<Vec<S>> {
        None
    }
}

fn check_dim<S: Scalar>(sys: &dyn ParametricSystem<S>, u: &[S]) -> Result<(), ModelError> {
    if u.len() != sys.dim() {
        return Err(ModelError::DimensionMismatch { expected: sys.dim(), found: u.len() });
    }
    Ok(())
}

pub fn evaluate<S: Scalar>(sys: &dyn ParametricSystem<S>, u: &[S], p: S) -> Result<Vec<S>, ModelError> {
    check_dim(sys, u)?;
    let mut out = vec![S::zero(); sys.dim()];
    sys.eval_into(u, p, &mut out);
    Ok(out)
}

/// `‖F(u, p)‖₂`.
pub fn residual_norm<S: Scalar>(sys: &dyn ParametricSystem<S>, u: &[S], p: S) -> Result<S, ModelError> {
    Ok(norm2(&evaluate(sys, u, p)?))
}

/// Damped Newton at fixed `p` until `‖F‖∞ ≤ tol`. Returns `None` on failure.
pub fn newton_fixed_p<S: Scalar>(sys: &dyn ParametricSystem<S>, guess: &[S], p: S, tol: S, cap: usize) -> Option<Vec<S>> {
    let mut u = guess.to_vec();
    let mut f = evaluate(sys, &u, p).ok()?;
    let mut r = norm_inf(&f);
    for _ in 0..cap {
        if r <= tol {
            return Some(u);
        }
        let j = jacobian_u(sys, &u, p).ok()?;
        let du = Lu::factor(&j).ok()?.solve(&f);
        let mut t = S::one();
        let mut accepted = false;
        for _ in 0..12 {
            let trial: Vec<S> = u.iter().zip(&du).map(|(&a, &d)| a - t * d).collect();
            let ft = evaluate(sys, &trial, p).ok()?;
            let rt = norm_inf(&ft);
            if rt.is_finite() && rt < r {
                u = trial;
                f = ft;
                r = rt;
                accepted = true;
                break;
            }
            t = t * lit(0.5);
        }
        if !accepted {
            break;
        }
    }
    (r <= tol).then_some(u)
}

/// Default relative step for central differences.
pub const FD_STEP: f64 = 1e-6;

pub fn jacobian_u<S: Scalar>(sys: &dyn ParametricSystem<S>, u: &[S], p: S) -> Result<DenseMatrix<S>, ModelError> {
    check_dim(sys, u)?;
    Ok(sys.analytic_jacobian_u(u, p).unwrap_or_else(|| fd_jacobian_u(sys, u, p, lit(FD_STEP))))
}

pub fn jacobian_p<S: Scalar>(sys: &dyn ParametricSystem<S>, u: &[S], p: S) -> Result<Vec<S>, ModelError> {
    check_dim(sys, u)?;
    Ok(sys.analytic_jacobian_p(u, p).unwrap_or_else(|| fd_jacobian_p(sys, u, p, lit(FD_STEP))))
}

/// Central differences with step `rel·max(1, |u_j|)`.
pub fn fd_jacobian_u<S: Scalar>(sys: &dyn ParametricSystem<S>, u: &[S], p: S, rel: S) -> DenseMatrix<S> {
    let n = sys.dim();
    let mut jac = DenseMatrix::zeros(n, n);
    let mut x = u.to_vec();
    let mut fp = vec![S::zero(); n];
    let mut fm = vec![S::zero(); n];
    for j in 0..n {
        let h = rel * S::one().max(u[j].abs());
        x[j] = u[j] + h;
        sys.eval_into(&x, p, &mut fp);
        x[j] = u[j] - h;
        sys.eval_into(&x, p, &mut fm);
        x[j] = u[j];
        let inv = S::one() / (h + h);
        for i in 0..n {
            jac[(i, j)] = (fp[i] - fm[i]) * inv;
        }
    }
    jac
}

pub fn fd_jacobian_p<S: Scalar>(sys: &dyn ParametricSystem<S>, u: &[S], p: S, rel: S) -> Vec<S> {
    let n = sys.dim();
    let h = rel * S::one().max(p.abs());
    let mut fp = vec![S::zero(); n];
    let mut fm = vec![S::zero(); n];
    sys.eval_into(u, p + h, &mut fp);
    sys.eval_into(u, p - h, &mut fm);
    fp.iter().zip(&fm).map(|(&a, &b)| (a - b) / (h + h)).collect()
}

/// Worst relative disagreement between analytic and finite-difference
/// Jacobians over the probes; `None` when the system has no analytic Jacobian.
pub fn jacobian_fd_discrepancy<S: Scalar>(sys: &dyn ParametricSystem<S>, probes: &[(Vec<S>, S)]) -> Option<S> {
    let mut worst = S::zero();
    for (u, p) in probes {
        let ju = sys.analytic_jacobian_u(u, *p)?;
        let jp = sys.analytic_jacobian_p(u, *p)?;
        let fu = fd_jacobian_u(sys, u, *p, lit(FD_STEP));
        let fp = fd_jacobian_p(sys, u, *p, lit(FD_STEP));
        let scale = ju.max_abs().max(crate::linalg::norm_inf(&jp)).max(S::one());
        let du = ju.sub(&fu).max_abs();
        let dp = jp.iter().zip(&fp).fold(S::zero(), |m, (&a, &b)| m.max((a - b).abs()));
        worst = worst.max(du.max(dp) / scale);
    }
    Some(worst)
}

/// Checks analytic Jacobians against central differences at `count` random
/// points in the box `|u_i| ≤ radius`, `|p| ≤ radius`.
pub fn validate_jacobians<S: Scalar>(
    sys: &dyn ParametricSystem<S>,
    count: usize,
    radius: f64,
    seed: u64,
    rel_tol: S,
) -> Result<S, S> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probes: Vec<(Vec<S>, S)> = (0..count)
        .map(|_| {
            let u = (0..sys.dim()).map(|_| lit(rng.gen_range(-radius..radius))).collect();
            (u, lit(rng.gen_range(-radius..radius)))
        })
        .collect();
    match jacobian_fd_discrepancy(sys, &probes) {
        None => Ok(S::zero()),
        Some(err) if err <= rel_tol => Ok(err),
        Some(err) => Err(err),
    }
}

/// A system assembled from closures.
pub struct FnSystem<S> {
    name: String,
    dim: usize,
    f: Box<dyn Fn(&[S], S, &mut [S]) + Send + Sync>,
    ju: Option<Box<dyn Fn(&[S], S) -> DenseMatrix<S> + Send + Sync>>,
    jp: Option<Box<dyn Fn(&[S], S) -> Vec<S> + Send + Sync>>,
}

impl<S: Scalar> FnSystem<S> {
    pub fn new(name: &str, dim: usize, f: impl Fn(&[S], S, &mut [S]) + Send + Sync + 'static) -> Self {
        Self { name: name.to_string(), dim, f: Box::new(f), ju: None, jp: None }
    }

    pub fn with_jacobians(
        mut self,
        ju: impl Fn(&[S], S) -> DenseMatrix<S> + Send + Sync + 'static,
        jp: impl Fn(&[S], S) -> Vec<S> + Send + Sync + 'static,
    ) -> Self {
        self.ju = Some(Box::new(ju));
        self.jp = Some(Box::new(jp));
        self
    }
}

impl<S: Scalar> ParametricSystem<S> for FnSystem<S> {
    fn name(&self) -> &str {
        &self.name
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval_into(&self, u: &[S], p: S, out: &mut [S]) {
        (self.f)(u, p, out)
    }
    fn analytic_jacobian_u(&self, u: &[S], p: S) -> Option<DenseMatrix<S>> {
        self.ju.as_ref().map(|j| j(u, p))
    }
    fn analytic_jacobian_p(&self, u: &[S], p: S) -> Option<Vec<S>> {
        self.jp.as_ref().map(|j| j(u, p))
    }
}

/// `(x² − p, x² − 2y² + p)`: a fold of two branches meeting at the origin.
#[derive(Clone, Copy, Debug, Default)]
pub struct Ex11;

impl<S: Scalar> ParametricSystem<S> for Ex11 {
    fn name(&self) -> &str {
        "ex11"
    }
    fn dim(&self) -> usize {
        2
    }
    fn eval_into(&self, u: &[S], p: S, out: &mut [S]) {
        let (x, y) = (u[0], u[1]);
        out[0] = x * x - p;
        out[1] = x * x - lit::<S>(2.0) * y * y + p;
    }
    fn analytic_jacobian_u(&self, u: &[S], _p: S) -> Option<DenseMatrix<S>> {
        let two = lit::<S>(2.0);
        Some(DenseMatrix::from_row_slice(2, 2, &[two * u[0], S::zero(), two * u[0], lit::<S>(-4.0) * u[1]]))
    }
    fn analytic_jacobian_p(&self, _u: &[S], _p: S) -> Option<Vec<S>> {
        Some(vec![-S::one(), S::one()])
    }
}

/// `(x² − p², (x + y)² − p³)`: branches with fractional Puiseux exponents.
#[derive(Clone, Copy, Debug, Default)]
pub struct Ilex;

impl<S: Scalar> ParametricSystem<S> for Ilex {
    fn name(&self) -> &str {
        "ilex"
    }
    fn dim(&self) -> usize {
        2
    }
    fn eval_into(&self, u: &[S], p: S, out: &mut [S]) {
        let (x, y) = (u[0], u[1]);
        out[0] = x * x - p * p;
        out[1] = (x + y) * (x + y) - p * p * p;
    }
    fn analytic_jacobian_u(&self, u: &[S], _p: S) -> Option<DenseMatrix<S>> {
        let two = lit::<S>(2.0);
        let s = two * (u[0] + u[1]);
        Some(DenseMatrix::from_row_slice(2, 2, &[two * u[0], S::zero(), s, s]))
    }
    fn analytic_jacobian_p(&self, _u: &[S], p: S) -> Option<Vec<S>> {
        Some(vec![lit::<S>(-2.0) * p, lit::<S>(-3.0) * p * p])
    }
}

/// `(x − p)⁴ + (x − p)(x + p)`: two curves crossing transversally at the origin.
#[derive(Clone, Copy, Debug, Default)]
pub struct Ex21;

impl<S: Scalar> ParametricSystem<S> for Ex21 {
    fn name(&self) -> &str {
        "ex21"
    }
    fn dim(&self) -> usize {
        1
    }
    fn eval_into(&self, u: &[S], p: S, out: &mut [S]) {
        let d = u[0] - p;
        out[0] = d * d * d * d + d * (u[0] + p);
    }
    fn analytic_jacobian_u(&self, u: &[S], p: S) -> Option<DenseMatrix<S>> {
        let d = u[0] - p;
        let v = lit::<S>(4.0) * d * d * d + lit::<S>(2.0) * u[0];
        Some(DenseMatrix::from_row_slice(1, 1, &[v]))
    }
    fn analytic_jacobian_p(&self, u: &[S], p: S) -> Option<Vec<S>> {
        let d = u[0] - p;
        Some(vec![lit::<S>(-4.0) * d * d * d - lit::<S>(2.0) * p])
    }
}

/// `(x² + p² − 1)((x − 1)² + p² − 1)`: two unit circles.
#[derive(Clone, Copy, Debug, Default)]
pub struct Ex22;

impl Ex22 {
    /// The two circle factors, for diagnostics.
    pub fn factors<S: Scalar>(x: S, p: S) -> (S, S) {
        let one = S::one();
        (x * x + p * p - one, (x - one) * (x - one) + p * p - one)
    }
}

impl<S: Scalar> ParametricSystem<S> for Ex22 {
    fn name(&self) -> &str {
        "ex22"
    }
    fn dim(&self) -> usize {
        1
    }
    fn eval_into(&self, u: &[S], p: S, out: &mut [S]) {
        let (a, b) = Ex22::factors(u[0], p);
        out[0] = a * b;
    }
    fn analytic_jacobian_u(&self, u: &[S], p: S) -> Option<DenseMatrix<S>> {
        let x = u[0];
        let (a, b) = Ex22::factors(x, p);
        let two = lit::<S>(2.0);
        Some(DenseMatrix::from_row_slice(1, 1, &[two * x * b + a * two * (x - S::one())]))
    }
    fn analytic_jacobian_p(&self, u: &[S], p: S) -> Option<Vec<S>> {
        let (a, b) = Ex22::factors(u[0], p);
        let two = lit::<S>(2.0);
        Some(vec![two * p * (a + b)])
    }
}

/// `(x − p)² + (1/3 − 2(x + p) + (x + p)³)(x − p)`: the diagonal `x = p`
/// is a solution curve crossed twice by a second branch.
#[derive(Clone, Copy, Debug, Default)]
pub struct Ex23;

impl<S: Scalar> ParametricSystem<S> for Ex23 {
    fn name(&self) -> &str {
        "ex23"
    }
    fn dim(&self) -> usize {
        1
    }
    fn eval_into(&self, u: &[S], p: S, out: &mut [S]) {
        let d = u[0] - p;
        let s = u[0] + p;
        let q = lit::<S>(1.0 / 3.0) - lit::<S>(2.0) * s + s * s * s;
        out[0] = d * d + q * d;
    }
    fn analytic_jacobian_u(&self, u: &[S], p: S) -> Option<DenseMatrix<S>> {
        let d = u[0] - p;
        let s = u[0] + p;
        let q = lit::<S>(1.0 / 3.0) - lit::<S>(2.0) * s + s * s * s;
        let dq = lit::<S>(-2.0) + lit::<S>(3.0) * s * s;
        Some(DenseMatrix::from_row_slice(1, 1, &[lit::<S>(2.0) * d + dq * d + q]))
    }
    fn analytic_jacobian_p(&self, u: &[S], p: S) -> Option<Vec<S>> {
        let d = u[0] - p;
        let s = u[0] + p;
        let q = lit::<S>(1.0 / 3.0) - lit::<S>(2.0) * s + s * s * s;
        let dq = lit::<S>(-2.0) + lit::<S>(3.0) * s * s;
        Some(vec![lit::<S>(-2.0) * d + dq * d - q])
    }
}

pub const PROBLEM_NAMES: [&str; 7] = ["ex11", "ilex", "ex21", "ex22", "ex23", "pde1d", "competition"];

/// Constructor parameters for [`builtin`].
#[derive(Clone, Debug)]
pub struct ProblemParams {
    /// Grid size for the PDE problems.
    pub grid_n: Option<usize>,
    /// Diffusion rate for `competition`.
    pub d: Option<f64>,
}

impl Default for ProblemParams {
    fn default() -> Self {
        Self { grid_n: None, d: None }
    }
}

pub fn builtin<S: Scalar>(name: &str, params: &ProblemParams) -> Result<Box<dyn ParametricSystem<S>>, ModelError> {
    Ok(match name {
        "ex11" => Box::new(Ex11),
        "ilex" => Box::new(Ilex),
        "ex21" => Box::new(Ex21),
        "ex22" => Box::new(Ex22),
        "ex23" => Box::new(Ex23),
        "pde1d" => Box::new(crate::pde::build_pde1d::<S>(params.grid_n.unwrap_or(crate::pde::PDE1D_DEFAULT_N))?),
        "competition" => Box::new(crate::pde::build_competition::<S>(
            params.grid_n.unwrap_or(crate::pde::COMPETITION_DEFAULT_N),
            lit(params.d.unwrap_or(1.0)),
        )?),
        other => return Err(ModelError::UnknownProblem(other.to_string())),
    })
}

/// Documented start point and run defaults for a registered problem.
#[derive(Clone, Debug)]
pub struct ProblemRegistryEntry {
    pub name: &'static str,
    pub description: &'static str,
    /// `None` for PDE problems, whose start is computed.
    pub u0: Option<Vec<f64>>,
    pub p0: f64,
    pub h: f64,
    pub p_end: f64,
    /// Residual tolerance suited to the problem's scale.
    pub newton_tol: f64,
    /// Folds after which a branch ends; `None` passes every fold.
    pub fold_limit: Option<usize>,
}

pub fn registry() -> Vec<ProblemRegistryEntry> {
    vec![
        ProblemRegistryEntry {
            name: "ex11",
            description: "x^2-p, x^2-2y^2+p; turning point at the origin",
            u0: Some(vec![-1.0, 1.0]),
            p0: 1.0,
            h: -0.2,
            p_end: -0.5,
            newton_tol: 1e-10,
            fold_limit: None,
        },
        ProblemRegistryEntry {
            name: "ilex",
            description: "x^2-p^2, (x+y)^2-p^3; winding number 3 at the origin",
            u0: Some(vec![-1.0, 2.0]),
            p0: 1.0,
            h: -0.1,
            p_end: -0.5,
            newton_tol: 1e-10,
            fold_limit: None,
        },
        ProblemRegistryEntry {
            name: "ex21",
            description: "(x-p)^4+(x-p)(x+p); transversal crossing at the origin",
            u0: Some(vec![1.0]),
            p0: 1.0,
            h: -0.1,
            p_end: -1.0,
            newton_tol: 1e-10,
            fold_limit: None,
        },
        ProblemRegistryEntry {
            name: "ex22",
            description: "two unit circles centred at x=0 and x=1",
            u0: Some(vec![0.5]),
            p0: 0.75f64.sqrt(),
            h: 0.1,
            p_end: 1.0,
            newton_tol: 1e-10,
            fold_limit: Some(1),
        },
        ProblemRegistryEntry {
            name: "ex23",
            description: "diagonal x=p crossed twice by a cubic branch",
            u0: Some(vec![1.0]),
            p0: 1.0,
            h: -0.05,
            p_end: -0.03,
            newton_tol: 1e-10,
            fold_limit: None,
        },
        ProblemRegistryEntry {
            name: "pde1d",
            description: "u_xx = u^2(u^2-p), u_x(0)=0, u(1)=0, finite differences",
            u0: None,
            p0: 18.0,
            h: -0.4,
            p_end: 0.0,
            newton_tol: 1e-8,
            fold_limit: None,
        },
        ProblemRegistryEntry {
            name: "competition",
            description: "two-species directed-movement competition model, diagonal branch",
            u0: None,
            p0: 0.01,
            h: 0.01,
            p_end: 1.0,
            newton_tol: 1e-8,
            fold_limit: None,
        },
    ]
}

pub fn registry_entry(name: &str) -> Result<ProblemRegistryEntry, ModelError> {
    registry().into_iter().find(|e| e.name == name).ok_or_else(|| ModelError::UnknownProblem(name.to_string()))
}
