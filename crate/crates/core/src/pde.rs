//! Finite-difference discretizations of the two PDE problems.

use crate::linalg::{norm_inf, DenseMatrix, Lu};
use crate::model::{newton_fixed_p, ModelError, ParametricSystem};
use crate::{from_usize, lit, Scalar};

pub const PDE1D_DEFAULT_N: usize = 360;
pub const COMPETITION_DEFAULT_N: usize = 320;

/// Uniform grid on `[0, 1]` with `x_0 = 0`, `x_{N-1} = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid1D<S> {
    pub n: usize,
    pub h: S,
    pub nodes: Vec<S>,
}

impl<S: Scalar> Grid1D<S> {
    pub fn new(n: usize) -> Result<Self, ModelError> {
        if n < 3 {
            return Err(ModelError::InvalidGrid(format!("need N >= 3, got {n}")));
        }
        let h = S::one() / from_usize::<S>(n - 1);
        let nodes = (0..n).map(|i| from_usize::<S>(i) * h).collect();
        Ok(Self { n, h, nodes })
    }
}

/// `u_xx = u²(u² − p)` on `[0, 1]` with `u_x(0) = 0` (ghost node `u_{-1} = u_1`)
/// and `u(1) = 0` (eliminated). Unknowns are the first `N − 1` nodes.
#[derive(Clone, Debug)]
pub struct Pde1d<S> {
    pub grid: Grid1D<S>,
    name: String,
}

pub fn build_pde1d<S: Scalar>(n: usize) -> Result<Pde1d<S>, ModelError> {
    Ok(Pde1d { grid: Grid1D::new(n)?, name: "pde1d".into() })
}

#[inline]
fn reaction<S: Scalar>(u: S, p: S) -> S {
    u * u * (u * u - p)
}

impl<S: Scalar> ParametricSystem<S> for Pde1d<S> {
    fn name(&self) -> &str {
        &self.name
    }
    fn dim(&self) -> usize {
        self.grid.n - 1
    }
    fn eval_into(&self, u: &[S], p: S, out: &mut [S]) {
        let m = u.len();
        let ih2 = S::one() / (self.grid.h * self.grid.h);
        for i in 0..m {
            let left = if i == 0 { u[1.min(m - 1)] } else { u[i - 1] };
            let right = if i + 1 < m { u[i + 1] } else { S::zero() };
            out[i] = (left - lit::<S>(2.0) * u[i] + right) * ih2 - reaction(u[i], p);
        }
    }
    fn analytic_jacobian_u(&self, u: &[S], p: S) -> Option<DenseMatrix<S>> {
        let m = u.len();
        let ih2 = S::one() / (self.grid.h * self.grid.h);
        let mut j = DenseMatrix::zeros(m, m);
        for i in 0..m {
            let x = u[i];
            j[(i, i)] = lit::<S>(-2.0) * ih2 - (lit::<S>(4.0) * x * x * x - lit::<S>(2.0) * p * x);
            if i + 1 < m {
                j[(i, i + 1)] = if i == 0 { ih2 + ih2 } else { ih2 };
            }
            if i > 0 {
                j[(i, i - 1)] = ih2;
            }
        }
        Some(j)
    }
    fn analytic_jacobian_p(&self, u: &[S], _p: S) -> Option<Vec<S>> {
        Some(u.iter().map(|&x| x * x).collect())
    }
}

/// Solutions found by multi-start Newton.
#[derive(Clone, Debug)]
pub struct SolutionSet<S> {
    /// Sorted by max-norm, largest first.
    pub solutions: Vec<Vec<S>>,
    /// Guesses whose Newton run did not converge.
    pub dropped: usize,
}

/// Multi-start Newton at parameter `p`; converged results (`‖F‖∞ ≤ 1e-9`)
/// closer than `dedupe_tol` in max norm are merged.
pub fn find_solutions<S: Scalar>(sys: &dyn ParametricSystem<S>, p: S, guesses: &[Vec<S>], dedupe_tol: S) -> Result<SolutionSet<S>, ModelError> {
    find_solutions_with_tol(sys, p, guesses, dedupe_tol, lit(1e-9))
}

pub fn find_solutions_with_tol<S: Scalar>(
    sys: &dyn ParametricSystem<S>,
    p: S,
    guesses: &[Vec<S>],
    dedupe_tol: S,
    tol: S,
) -> Result<SolutionSet<S>, ModelError> {
    let mut found: Vec<Vec<S>> = Vec::new();
    let mut dropped = 0;
    for g in guesses {
        if g.len() != sys.dim() {
            return Err(ModelError::DimensionMismatch { expected: sys.dim(), found: g.len() });
        }
        match newton_fixed_p(sys, g, p, tol, 60) {
            Some(u) => found.push(u),
            None => dropped += 1,
        }
    }
    Ok(SolutionSet { solutions: dedupe(found, dedupe_tol), dropped })
}

/// Order-independent dedupe: sort by max-norm (then first component), keep
/// the first of every cluster.
fn dedupe<S: Scalar>(mut sols: Vec<Vec<S>>, tol: S) -> Vec<Vec<S>> {
    sols.sort_by(|a, b| {
        let ka = (norm_inf(a), a.first().copied().unwrap_or(S::zero()));
        let kb = (norm_inf(b), b.first().copied().unwrap_or(S::zero()));
        kb.partial_cmp(&ka).unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut out: Vec<Vec<S>> = Vec::new();
    for s in sols {
        if out.iter().all(|o| norm_inf(&crate::linalg::sub(o, &s)) > tol) {
            out.push(s);
        }
    }
    out
}

/// `c·cos(kπx/2)` for every amplitude and odd mode; each satisfies both
/// boundary conditions.
pub fn cosine_guesses<S: Scalar>(grid: &Grid1D<S>, amplitudes: &[f64], modes: &[usize]) -> Vec<Vec<S>> {
    let half_pi = lit::<S>(std::f64::consts::FRAC_PI_2);
    let mut out = Vec::new();
    for &k in modes {
        for &c in amplitudes {
            out.push(
                grid.nodes[..grid.n - 1]
                    .iter()
                    .map(|&x| lit::<S>(c) * (from_usize::<S>(k) * half_pi * x).cos())
                    .collect(),
            );
        }
    }
    out
}

/// The cosine family `c ∈ {±1..±5}`, `k ∈ {1, 3, 5, 7}`.
pub fn default_cosine_guesses<S: Scalar>(grid: &Grid1D<S>) -> Vec<Vec<S>> {
    cosine_guesses(grid, &[1.0, -1.0, 2.0, -2.0, 3.0, -3.0, 4.0, -4.0, 5.0, -5.0], &[1, 3, 5, 7])
}

/// Marches the discrete pde1d recursion from `u_0 = a` with the ghost-node
/// start, returning the full profile (`None` on blow-up).
fn shoot<S: Scalar>(grid: &Grid1D<S>, p: S, a: S) -> Result<Vec<S>, S> {
    let n = grid.n;
    let h2 = grid.h * grid.h;
    let cap = lit::<S>(1e4);
    let mut u = Vec::with_capacity(n);
    u.push(a);
    u.push(a + h2 * reaction(a, p) * lit(0.5));
    for i in 1..n - 1 {
        let next = lit::<S>(2.0) * u[i] - u[i - 1] + h2 * reaction(u[i], p);
        if !(next.abs() < cap) {
            return Err(if next > S::zero() { cap } else { -cap });
        }
        u.push(next);
    }
    Ok(u)
}

/// Initial guesses for pde1d from discrete shooting: scans `u(0)`, brackets
/// sign changes of `u(1)` and bisects. Returned profiles exclude the
/// eliminated boundary node.
pub fn shooting_guesses<S: Scalar>(grid: &Grid1D<S>, p: S, scan: usize) -> Vec<Vec<S>> {
    let root = p.abs().sqrt();
    let amax = lit::<S>(2.0) * root + S::one();
    let mut starts: Vec<S> = (0..=scan).map(|k| -amax + lit::<S>(2.0) * amax * from_usize::<S>(k) / from_usize::<S>(scan)).collect();
    // Plateau solutions sit exponentially close to ±√p.
    for k in 1..15 {
        let e = lit::<S>(10f64.powi(-(k as i32)));
        for sgn in [S::one(), -S::one()] {
            starts.push(sgn * root * (S::one() - e));
            starts.push(sgn * root * (S::one() + e));
        }
    }
    starts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    starts.dedup();
    let end = |a: S| shoot(grid, p, a).map(|u| *u.last().expect("grid has nodes"));
    let mut out = Vec::new();
    let mut prev: Option<(S, S)> = None;
    for &a in &starts {
        let cur = end(a).ok().map(|v| (a, v));
        if let (Some((a0, v0)), Some((a1, v1))) = (prev, cur) {
            if v0 == S::zero() {
                out.push(a0);
            } else if v0 * v1 < S::zero() {
                let (mut lo, mut hi, mut flo) = (a0, a1, v0);
                let mut ok = true;
                for _ in 0..200 {
                    let mid = (lo + hi) * lit(0.5);
                    if mid == lo || mid == hi {
                        break;
                    }
                    match end(mid) {
                        Ok(fm) => {
                            if fm * flo <= S::zero() {
                                hi = mid;
                            } else {
                                lo = mid;
                                flo = fm;
                            }
                        }
                        Err(_) => {
                            ok = false;
                            break;
                        }
                    }
                }
                if ok {
                    out.push((lo + hi) * lit(0.5));
                }
            }
        }
        prev = cur;
    }
    out.into_iter()
        .filter_map(|a| shoot(grid, p, a).ok())
        .map(|mut u| {
            u.pop();
            u
        })
        .collect()
}

/// Nontrivial pde1d solutions at `p`, largest max-norm first. Guesses are
/// the cosine family plus the shooting family.
pub fn pde1d_solutions<S: Scalar>(sys: &Pde1d<S>, p: S) -> Result<SolutionSet<S>, ModelError> {
    let mut guesses = default_cosine_guesses(&sys.grid);
    guesses.extend(shooting_guesses(&sys.grid, p, 4000));
    let mut set = find_solutions(sys, p, &guesses, lit(1e-4))?;
    set.solutions.retain(|u| norm_inf(u) > lit(1e-6));
    Ok(set)
}

/// Two-species competition with directed movement along the resource
/// `m(x) = 1 + x`. Unknowns `(β, u_1..u_N, v_1..v_N)`, parameter `α`.
#[derive(Clone, Debug)]
pub struct Competition<S> {
    pub grid: Grid1D<S>,
    pub d: S,
    pub m: Vec<S>,
    /// Trapezoid weights.
    pub weights: Vec<S>,
}

pub fn build_competition<S: Scalar>(n: usize, d: S) -> Result<Competition<S>, ModelError> {
    if !(d > S::zero()) {
        return Err(ModelError::InvalidGrid(format!("diffusion d must be positive, got {d}")));
    }
    let grid = Grid1D::new(n)?;
    let m = grid.nodes.iter().map(|&x| S::one() + x).collect();
    let mut weights = vec![grid.h; n];
    weights[0] = grid.h * lit(0.5);
    weights[n - 1] = grid.h * lit(0.5);
    Ok(Competition { grid, d, m, weights })
}

/// Resident and invader densities on the diagonal branch.
#[derive(Clone, Debug, PartialEq)]
pub struct CompetitionState<S> {
    pub beta: S,
    pub u: Vec<S>,
    pub v: Vec<S>,
    pub alpha: S,
    pub d: S,
    pub m: Vec<S>,
}

impl<S: Scalar> CompetitionState<S> {
    /// Packed unknown vector `(β, u, v)`.
    pub fn to_vector(&self) -> Vec<S> {
        let mut z = Vec::with_capacity(1 + 2 * self.u.len());
        z.push(self.beta);
        z.extend_from_slice(&self.u);
        z.extend_from_slice(&self.v);
        z
    }
}

impl<S: Scalar> Competition<S> {
    pub fn n(&self) -> usize {
        self.grid.n
    }

    pub fn trapezoid(&self, v: &[S]) -> S {
        v.iter().zip(&self.weights).map(|(&a, &w)| a * w).sum()
    }

    /// One diffusion–advection block with rate `rate` and reaction `y_i (m_i − u_i)`.
    fn block(&self, y: &[S], u: &[S], rate: S, out: &mut [S]) {
        let n = self.n();
        let h = self.grid.h;
        let c = self.d / (h * h);
        let two = lit::<S>(2.0);
        let adv = rate / (two * h);
        out[0] = two * c * y[1] - (two * c + two * rate / h + rate * rate / self.d) * y[0] + y[0] * (self.m[0] - u[0]);
        for i in 1..n - 1 {
            out[i] = c * (y[i + 1] - two * y[i] + y[i - 1]) - adv * (y[i + 1] - y[i - 1]) + y[i] * (self.m[i] - u[i]);
        }
        let l = n - 1;
        out[l] = (-two * c + two * rate / h - rate * rate / self.d) * y[l] + two * c * y[l - 1] + y[l] * (self.m[l] - u[l]);
    }

    /// Jacobian of [`Self::block`] in `y`, excluding the reaction's `u` dependence.
    fn block_jacobian(&self, rate: S, u: &[S], j: &mut DenseMatrix<S>, r0: usize, c0: usize) {
        let n = self.n();
        let h = self.grid.h;
        let c = self.d / (h * h);
        let two = lit::<S>(2.0);
        let adv = rate / (two * h);
        j[(r0, c0)] = -(two * c + two * rate / h + rate * rate / self.d) + self.m[0] - u[0];
        j[(r0, c0 + 1)] = two * c;
        for i in 1..n - 1 {
            j[(r0 + i, c0 + i - 1)] = c + adv;
            j[(r0 + i, c0 + i)] = -two * c + self.m[i] - u[i];
            j[(r0 + i, c0 + i + 1)] = c - adv;
        }
        let l = n - 1;
        j[(r0 + l, c0 + l)] = (-two * c + two * rate / h - rate * rate / self.d) + self.m[l] - u[l];
        j[(r0 + l, c0 + l - 1)] = two * c;
    }

    /// Derivative of [`Self::block`] with respect to the rate.
    fn block_rate_derivative(&self, y: &[S], rate: S) -> Vec<S> {
        let n = self.n();
        let h = self.grid.h;
        let two = lit::<S>(2.0);
        let mut out = vec![S::zero(); n];
        out[0] = -(two / h + two * rate / self.d) * y[0];
        for i in 1..n - 1 {
            out[i] = -(y[i + 1] - y[i - 1]) / (two * h);
        }
        out[n - 1] = (two / h - two * rate / self.d) * y[n - 1];
        out
    }

    fn split<'a>(&self, z: &'a [S]) -> (S, &'a [S], &'a [S]) {
        let n = self.n();
        (z[0], &z[1..n + 1], &z[n + 1..2 * n + 1])
    }

    /// The resident equation alone, as an `N`-dimensional system in `u`.
    pub fn resident_residual(&self, u: &[S], alpha: S) -> Vec<S> {
        let mut out = vec![S::zero(); self.n()];
        self.block(u, u, alpha, &mut out);
        out
    }

    fn resident_jacobian(&self, u: &[S], alpha: S) -> DenseMatrix<S> {
        let n = self.n();
        let mut j = DenseMatrix::zeros(n, n);
        self.block_jacobian(alpha, u, &mut j, 0, 0);
        for i in 0..n {
            j[(i, i)] = j[(i, i)] - u[i];
        }
        j
    }
}

impl<S: Scalar> ParametricSystem<S> for Competition<S> {
    fn name(&self) -> &str {
        "competition"
    }
    fn dim(&self) -> usize {
        2 * self.n() + 1
    }
    fn eval_into(&self, z: &[S], alpha: S, out: &mut [S]) {
        let n = self.n();
        let (beta, u, v) = self.split(z);
        self.block(u, u, alpha, &mut out[..n]);
        self.block(v, u, beta, &mut out[n..2 * n]);
        out[2 * n] = self.trapezoid(v) - S::one();
    }
    fn analytic_jacobian_u(&self, z: &[S], alpha: S) -> Option<DenseMatrix<S>> {
        let n = self.n();
        let (beta, u, v) = self.split(z);
        let mut j = DenseMatrix::zeros(2 * n + 1, 2 * n + 1);
        self.block_jacobian(alpha, u, &mut j, 0, 1);
        for i in 0..n {
            j[(i, 1 + i)] = j[(i, 1 + i)] - u[i];
        }
        self.block_jacobian(beta, u, &mut j, n, 1 + n);
        let db = self.block_rate_derivative(v, beta);
        for i in 0..n {
            j[(n + i, 0)] = db[i];
            j[(n + i, 1 + i)] = -v[i];
            j[(2 * n, 1 + n + i)] = self.weights[i];
        }
        Some(j)
    }
    fn analytic_jacobian_p(&self, z: &[S], alpha: S) -> Option<Vec<S>> {
        let n = self.n();
        let (_, u, _) = self.split(z);
        let mut out = vec![S::zero(); 2 * n + 1];
        out[..n].copy_from_slice(&self.block_rate_derivative(u, alpha));
        Some(out)
    }
}

/// Resident equilibrium at `alpha0` with `β = α0`, `v = u / ∫u`: a point on
/// the diagonal branch.
pub fn initial_resident<S: Scalar>(alpha0: S, d: S, n: usize) -> Result<CompetitionState<S>, ModelError> {
    if !(alpha0 > S::zero()) {
        return Err(ModelError::NewtonFailed(format!("alpha0 must be positive, got {alpha0}")));
    }
    let sys = build_competition(n, d)?;
    let mut u = sys.m.clone();
    let mut converged = false;
    for _ in 0..60 {
        let r = sys.resident_residual(&u, alpha0);
        if norm_inf(&r) <= lit::<S>(1e-12) * S::one().max(sys.d / (sys.grid.h * sys.grid.h)) {
            converged = true;
            break;
        }
        let j = sys.resident_jacobian(&u, alpha0);
        let du = Lu::factor(&j).map_err(|e| ModelError::NewtonFailed(e.to_string()))?.solve(&r);
        for (a, b) in u.iter_mut().zip(&du) {
            *a = *a - *b;
        }
    }
    if !converged {
        return Err(ModelError::NewtonFailed("resident equation did not converge".into()));
    }
    let mass = sys.trapezoid(&u);
    let v = u.iter().map(|&x| x / mass).collect();
    Ok(CompetitionState { beta: alpha0, u, v, alpha: alpha0, d, m: sys.m.clone() })
}
