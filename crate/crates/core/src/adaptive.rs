//! Adaptive step-size tracking on the augmented system
//!
//! ```text
//! F(u, p)                                   = 0
//! g vᵀ(u − u0)(1 − s) + s (p − p0) − h      = 0
//! ```
//!
//! with `s = min(1, |λ/λ̃|)` and `g = sign(−vᵀF_u⁻¹F_p)/‖F_u⁻¹F_p‖(ũ, p̃)`.
//! Far from singular points `s ≈ 1` and the step is `p − p0 = h`; as the
//! smallest eigenvalue shrinks the constraint turns into a step along the
//! eigenvector.

use crate::inflation::{inflated_newton, InflationConfig, InflationError};
use crate::linalg::{
    dot, gmres, min_abs_real_eigenpair, norm2, DenseMatrix, LinalgError, Lu,
};
use crate::model::{evaluate, jacobian_p, jacobian_u, newton_fixed_p, ModelError, ParametricSystem};
use crate::{lit, Scalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TrackerError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("calibration failed: {0}")]
    CalibrationFailed(String),
    #[error("invalid tracker configuration: {0}")]
    InvalidConfig(String),
    #[error("augmented Newton needs inflation: {0}")]
    NeedsInflation(String),
    #[error("step failed after {0} halvings")]
    Stalled(usize),
    #[error("maximum number of steps ({0}) exceeded")]
    MaxStepsExceeded(usize),
}

/// One sample on a solution path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathPoint<S> {
    pub u: Vec<S>,
    pub p: S,
    /// Signed real part of the smallest-`|Re|` eigenvalue of `F_u`.
    pub lambda_min: S,
    pub residual: S,
    pub index: usize,
}

/// Which eigenvector of `F_u` enters the augmented row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EigenSide {
    #[default]
    Right,
    Left,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig<S> {
    pub h: S,
    pub p_end: S,
    pub newton_tol: S,
    pub newton_cap: usize,
    /// Endgame handoff when `|λ| < pse_zone·λ̃`.
    pub pse_zone: S,
    /// `|λ|` below `ill_cond_lambda·max(1, ‖F_u‖∞)` counts as singular.
    pub ill_cond_lambda: S,
    pub max_steps: usize,
    /// Largest winding number tried by the endgame.
    pub winding_max: usize,
    pub k1: S,
    pub k2: S,
    pub rng_seed: u64,
    pub eigen_side: EigenSide,
    /// Step halvings before a step is declared stalled.
    pub max_step_halvings: usize,
    /// Agreement required between successive endgame extrapolates.
    pub pse_tol: S,
    pub pse_rounds: usize,
    /// Null-space cutoff at bifurcation points, relative to `λ̃`.
    pub rank_cutoff: S,
    /// Augmented systems up to this size are solved directly; larger ones by
    /// GMRES preconditioned with the step's first LU.
    pub direct_limit: usize,
    pub inflation_cap: usize,
}

impl<S: Scalar> TrackerConfig<S> {
    pub fn new(h: S, p_end: S) -> Self {
        Self {
            h,
            p_end,
            newton_tol: lit(1e-10),
            newton_cap: 20,
            pse_zone: lit(0.1),
            ill_cond_lambda: lit(1e-6),
            max_steps: 10_000,
            winding_max: 6,
            k1: lit(0.5),
            k2: lit(0.25),
            rng_seed: 0,
            eigen_side: EigenSide::Right,
            max_step_halvings: 8,
            pse_tol: lit(1e-6),
            pse_rounds: 12,
            rank_cutoff: lit(0.05),
            direct_limit: 500,
            inflation_cap: 50,
        }
    }

    pub fn validate(&self) -> Result<(), TrackerError> {
        let bad = |m: &str| Err(TrackerError::InvalidConfig(m.to_string()));
        if self.h == S::zero() || !self.h.is_finite() {
            return bad("h must be nonzero and finite");
        }
        if !(self.pse_zone > S::zero() && self.pse_zone < S::one()) {
            return bad("pse_zone must lie in (0, 1)");
        }
        let unit = |k: S| k > S::zero() && k < S::one();
        if !unit(self.k1) || !unit(self.k2) || self.k1 == self.k2 {
            return bad("k1 and k2 must be distinct and lie in (0, 1)");
        }
        if !(self.newton_tol > S::zero()) || self.newton_cap == 0 {
            return bad("newton_tol and newton_cap must be positive");
        }
        if self.winding_max == 0 {
            return bad("winding_max must be at least 1");
        }
        Ok(())
    }

    pub fn inflation(&self) -> InflationConfig<S> {
        InflationConfig { newton_tol: self.newton_tol, newton_cap: self.inflation_cap, ..InflationConfig::default() }
    }
}

/// The generic point `(ũ, p̃)` that scales `s` and `g`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenericCalibration<S> {
    pub p_tilde: S,
    pub u_tilde: Vec<S>,
    /// `|Re λ̃|`, always positive.
    pub lambda_tilde: S,
    /// `‖F_u(ũ, p̃)⁻¹ F_p(ũ, p̃)‖₂`.
    pub newton_dir_norm: S,
    pub draws: usize,
}

/// Smallest-`|Re|` eigenpair of `F_u` (or `F_uᵀ`) with its real direction.
pub fn eigen_direction<S: Scalar>(j: &DenseMatrix<S>, side: EigenSide) -> Result<(S, Vec<S>), LinalgError> {
    let pair = match side {
        EigenSide::Right => min_abs_real_eigenpair(j)?,
        EigenSide::Left => min_abs_real_eigenpair(&j.transpose())?,
    };
    Ok((pair.re, pair.direction()))
}

fn lambda_at<S: Scalar>(sys: &dyn ParametricSystem<S>, u: &[S], p: S, side: EigenSide) -> Result<S, TrackerError> {
    Ok(eigen_direction(&jacobian_u(sys, u, p)?, side)?.0)
}

/// Draws `p̃` uniformly between the start and `p_end`, shrinking the interval
/// towards the start whenever Newton fails there (from the start point and
/// from one perturbed copy of it). A draw whose `|λ|` is below
/// `10·pse_zone·|λ_start|` is redrawn; after ten draws the best-conditioned
/// one is kept.
pub fn calibrate<S: Scalar>(
    sys: &dyn ParametricSystem<S>,
    start: &PathPoint<S>,
    config: &TrackerConfig<S>,
) -> Result<GenericCalibration<S>, TrackerError> {
    let (p0, pe) = (start.p, config.p_end);
    if p0 == pe {
        return Err(TrackerError::CalibrationFailed("empty parameter interval".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let lam_start = lambda_at(sys, &start.u, p0, config.eigen_side)?.abs();
    let floor = lit::<S>(10.0) * config.pse_zone * lam_start;
    let mut shrink = 0i32;
    let mut best: Option<GenericCalibration<S>> = None;
    for draw in 1..=10 {
        let hi = p0 + (pe - p0) * lit::<S>(0.5f64.powi(shrink));
        let p_tilde = p0 + (hi - p0) * lit::<S>(rng.gen::<f64>());
        // A start where F_u vanishes for every p defeats Newton from the
        // start itself, so one randomly perturbed guess is also tried.
        let radius = lit::<S>(0.05) * S::one().max(norm2(&start.u));
        let nudged: Vec<S> = start.u.iter().map(|&x| x + radius * lit::<S>(rng.gen::<f64>() - 0.5)).collect();
        let solved = newton_fixed_p(sys, &start.u, p_tilde, config.newton_tol, 50)
            .or_else(|| newton_fixed_p(sys, &nudged, p_tilde, config.newton_tol, 50));
        let Some(u_tilde) = solved else {
            shrink += 1;
            continue;
        };
        let j = jacobian_u(sys, &u_tilde, p_tilde)?;
        let (lam, _) = eigen_direction(&j, config.eigen_side)?;
        let Ok(lu) = Lu::factor(&j) else { continue };
        let z = lu.solve(&jacobian_p(sys, &u_tilde, p_tilde)?);
        let zn = norm2(&z);
        let lam = lam.abs();
        if !(lam > S::zero()) || !(zn > S::zero()) || !zn.is_finite() {
            continue;
        }
        let cand = GenericCalibration { p_tilde, u_tilde, lambda_tilde: lam, newton_dir_norm: zn, draws: draw };
        if lam >= floor {
            return Ok(cand);
        }
        if best.as_ref().map_or(true, |b| lam > b.lambda_tilde) {
            best = Some(cand);
        }
    }
    best.ok_or_else(|| TrackerError::CalibrationFailed("no draw produced a nonsingular solution".into()))
}

/// Everything the augmented row needs at a base point.
#[derive(Clone, Debug, PartialEq)]
pub struct StepState<S> {
    pub point: PathPoint<S>,
    /// Unit eigenvector, sign-continued along the path.
    pub v: Vec<S>,
    pub s: S,
    pub g: S,
    /// `F_u⁻¹ F_p` when `F_u` factors.
    pub z: Option<Vec<S>>,
    /// Sign of `det F_u`, 0 when the LU breaks down.
    pub det_sign: i8,
}

impl<S: Scalar> StepState<S> {
    /// Builds the state at `(u, p)`. `prev_v` keeps the eigenvector sign
    /// continuous; `prev_g` supplies the sign of `g` when `F_u` is singular.
    pub fn at(
        sys: &dyn ParametricSystem<S>,
        u: Vec<S>,
        p: S,
        index: usize,
        calib: &GenericCalibration<S>,
        side: EigenSide,
        prev_v: Option<&[S]>,
        prev_g: Option<S>,
    ) -> Result<Self, TrackerError> {
        let j = jacobian_u(sys, &u, p)?;
        let (lambda, mut v) = eigen_direction(&j, side)?;
        if let Some(pv) = prev_v {
            if pv.len() == v.len() && dot(pv, &v) < S::zero() {
                v.iter_mut().for_each(|x| *x = -*x);
            }
        }
        let (z, det_sign) = match Lu::factor(&j) {
            Ok(lu) => (Some(lu.solve(&jacobian_p(sys, &u, p)?)), lu.det_sign()),
            Err(_) => (None, 0),
        };
        let s = (lambda.abs() / calib.lambda_tilde).min(S::one());
        let fallback = prev_g.map(|g| g.signum()).unwrap_or(S::one());
        let sign = match &z {
            Some(z) => {
                let d = -dot(&v, z);
                if d > S::zero() {
                    S::one()
                } else if d < S::zero() {
                    -S::one()
                } else {
                    fallback
                }
            }
            None => fallback,
        };
        let residual = norm2(&evaluate(sys, &u, p)?);
        Ok(Self {
            point: PathPoint { u, p, lambda_min: lambda, residual, index },
            v,
            s,
            g: sign / calib.newton_dir_norm,
            z,
            det_sign,
        })
    }

    /// Parameter step predicted by the linearization, `h / (s − (1−s) g vᵀz)`.
    pub fn predicted_dp(&self, h: S) -> Option<S> {
        let z = self.z.as_ref()?;
        Some(h / (self.s - (S::one() - self.s) * self.g * dot(&self.v, z)))
    }
}

fn check_len<S>(state: &StepState<S>, u: &[S]) -> Result<(), TrackerError> {
    if u.len() != state.point.u.len() {
        return Err(ModelError::DimensionMismatch { expected: state.point.u.len(), found: u.len() }.into());
    }
    Ok(())
}

/// `(F(u, p), g vᵀ(u − u0)(1 − s) + s(p − p0) − h)`.
pub fn augmented_residual<S: Scalar>(
    sys: &dyn ParametricSystem<S>,
    state: &StepState<S>,
    u: &[S],
    p: S,
    h: S,
) -> Result<Vec<S>, TrackerError> {
    check_len(state, u)?;
    let mut out = evaluate(sys, u, p)?;
    let du: Vec<S> = u.iter().zip(&state.point.u).map(|(&a, &b)| a - b).collect();
    let one = S::one();
    out.push(state.g * dot(&state.v, &du) * (one - state.s) + state.s * (p - state.point.p) - h);
    Ok(out)
}

/// `[[F_u, F_p], [g(1 − s)vᵀ, s]]`.
pub fn augmented_jacobian<S: Scalar>(
    sys: &dyn ParametricSystem<S>,
    state: &StepState<S>,
    u: &[S],
    p: S,
) -> Result<DenseMatrix<S>, TrackerError> {
    check_len(state, u)?;
    let n = u.len();
    let ju = jacobian_u(sys, u, p)?;
    let jp = jacobian_p(sys, u, p)?;
    let mut a = DenseMatrix::zeros(n + 1, n + 1);
    for i in 0..n {
        a.row_mut(i)[..n].copy_from_slice(ju.row(i));
        a[(i, n)] = jp[i];
    }
    let w = state.g * (S::one() - state.s);
    for j in 0..n {
        a[(n, j)] = w * state.v[j];
    }
    a[(n, n)] = state.s;
    Ok(a)
}

/// The augmented system as an `(n+1)`-dimensional system in `w = (u, p)`;
/// its parameter argument is ignored. Lets the inflated corrector run on it.
pub struct AugmentedSystem<'a, S> {
    pub sys: &'a dyn ParametricSystem<S>,
    pub state: &'a StepState<S>,
    pub h: S,
}

impl<S: Scalar> ParametricSystem<S> for AugmentedSystem<'_, S> {
    fn name(&self) -> &str {
        "augmented"
    }
    fn dim(&self) -> usize {
        self.state.point.u.len() + 1
    }
    fn eval_into(&self, w: &[S], _p: S, out: &mut [S]) {
        let n = w.len() - 1;
        match augmented_residual(self.sys, self.state, &w[..n], w[n], self.h) {
            Ok(r) => out.copy_from_slice(&r),
            Err(_) => out.iter_mut().for_each(|x| *x = S::nan()),
        }
    }
    fn analytic_jacobian_u(&self, w: &[S], _p: S) -> Option<DenseMatrix<S>> {
        let n = w.len() - 1;
        augmented_jacobian(self.sys, self.state, &w[..n], w[n]).ok()
    }
    fn analytic_jacobian_p(&self, w: &[S], _p: S) -> Option<Vec<S>> {
        Some(vec![S::zero(); w.len()])
    }
}

/// A converged augmented step.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedStep<S> {
    pub u: Vec<S>,
    pub p: S,
    /// `‖F(u, p)‖₂`.
    pub residual: S,
    pub iterations: usize,
}

/// Inner linear solve: LU up to `direct_limit`, otherwise GMRES
/// preconditioned by the LU frozen at the first Newton iteration.
fn inner_solve<S: Scalar>(
    a: &DenseMatrix<S>,
    rhs: &[S],
    frozen: &mut Option<Lu<S>>,
    direct_limit: usize,
) -> Result<Vec<S>, LinalgError> {
    if a.rows() <= direct_limit {
        return Ok(Lu::factor(a)?.solve(rhs));
    }
    if frozen.is_none() {
        *frozen = Some(Lu::factor(a)?);
        return Ok(frozen.as_ref().expect("just set").solve(rhs));
    }
    let lu = frozen.as_ref().expect("checked above");
    let x0 = vec![S::zero(); rhs.len()];
    match gmres(|x| a.matvec(x), |x| lu.solve(x), rhs, &x0, lit(1e-10), 40, 200) {
        Ok(r) => Ok(r.solution),
        Err(_) => {
            let fresh = Lu::factor(a)?;
            let x = fresh.solve(rhs);
            *frozen = Some(fresh);
            Ok(x)
        }
    }
}

/// Newton on the augmented system from the frozen-state predictor
/// `(u0, p0 + h·s)`. Reports `NeedsInflation` on a singular inner solve, a
/// stall (less than halving over three iterations), divergence or the cap.
pub fn newton_step_augmented<S: Scalar>(
    sys: &dyn ParametricSystem<S>,
    state: &StepState<S>,
    h: S,
    config: &TrackerConfig<S>,
) -> Result<AugmentedStep<S>, TrackerError> {
    let mut u = state.point.u.clone();
    let mut p = state.point.p + h * state.s;
    let n = u.len();
    let mut frozen = None;
    let mut history: Vec<S> = Vec::new();
    for it in 0..=config.newton_cap {
        let r = augmented_residual(sys, state, &u, p, h)?;
        let rn = norm2(&r);
        if !rn.is_finite() {
            return Err(TrackerError::NeedsInflation("residual is not finite".into()));
        }
        if rn <= config.newton_tol {
            let residual = norm2(&r[..n]);
            return Ok(AugmentedStep { u, p, residual, iterations: it });
        }
        if it >= 3 && rn > lit::<S>(0.5) * history[it - 3] {
            return Err(TrackerError::NeedsInflation(format!("stalled at residual {rn:e}")));
        }
        history.push(rn);
        if it == config.newton_cap {
            break;
        }
        let a = augmented_jacobian(sys, state, &u, p)?;
        let d = inner_solve(&a, &r, &mut frozen, config.direct_limit)
            .map_err(|e| TrackerError::NeedsInflation(e.to_string()))?;
        for (x, dx) in u.iter_mut().zip(&d[..n]) {
            *x = *x - *dx;
        }
        p = p - d[n];
    }
    Err(TrackerError::NeedsInflation(format!("no convergence in {} iterations", config.newton_cap)))
}

/// Counters for one tracking run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrackStats {
    /// Accepted points, not counting the start.
    pub steps: usize,
    pub inflation_steps: usize,
    pub halvings: usize,
    /// Augmented Newton solves attempted, accepted or not.
    pub solves: usize,
}

/// Why a run stopped.
#[derive(Clone, Debug, PartialEq)]
pub enum StopReason<S> {
    /// The parameter left `[p_start, p_end]`.
    ReachedEnd,
    /// `|λ|` dropped below `pse_zone·λ̃` while decreasing.
    PseZone,
    /// `det F_u` changed sign across a step; the rejected point is attached.
    SignChange(Box<StepState<S>>),
    MaxSteps,
    Stalled,
    /// The run's guard fired.
    Guard,
}

impl<S> StopReason<S> {
    pub fn label(&self) -> &'static str {
        match self {
            StopReason::ReachedEnd => "reached_end",
            StopReason::PseZone => "pse_zone",
            StopReason::SignChange(_) => "sign_change",
            StopReason::MaxSteps => "max_steps",
            StopReason::Stalled => "stalled",
            StopReason::Guard => "visited",
        }
    }
}

/// A single tracking run along one branch.
pub struct Tracker<'a, S: Scalar> {
    pub sys: &'a dyn ParametricSystem<S>,
    pub calib: GenericCalibration<S>,
    pub config: TrackerConfig<S>,
    /// Current signed step-size.
    pub h: S,
    pub points: Vec<PathPoint<S>>,
    /// State at the last accepted point.
    pub state: StepState<S>,
    pub stats: TrackStats,
    /// Stop at once when `h` points away from `p_end`; cleared after a fold flips `h`.
    pub check_direction: bool,
    /// Closed parameter range the run stays in; starts as `[p_start, p_end]`.
    pub bounds: (S, S),
    /// Extra stop test on every accepted point, e.g. revisiting another branch.
    pub guard: Option<Box<dyn Fn(&PathPoint<S>) -> bool + 'a>>,
    p_start: S,
}

impl<'a, S: Scalar> Tracker<'a, S> {
    pub fn new(
        sys: &'a dyn ParametricSystem<S>,
        start: PathPoint<S>,
        calib: GenericCalibration<S>,
        config: TrackerConfig<S>,
    ) -> Result<Self, TrackerError> {
        config.validate()?;
        let state = StepState::at(sys, start.u, start.p, 0, &calib, config.eigen_side, None, None)?;
        Ok(Self::from_state(sys, state, calib, config))
    }

    /// Resumes from an existing state, e.g. a seed after branch switching.
    pub fn from_state(
        sys: &'a dyn ParametricSystem<S>,
        state: StepState<S>,
        calib: GenericCalibration<S>,
        config: TrackerConfig<S>,
    ) -> Self {
        let h = config.h;
        let p_start = state.point.p;
        let bounds = (p_start.min(config.p_end), p_start.max(config.p_end));
        Self {
            sys,
            calib,
            config,
            h,
            points: vec![state.point.clone()],
            state,
            stats: TrackStats::default(),
            check_direction: true,
            bounds,
            guard: None,
            p_start,
        }
    }

    pub fn p_start(&self) -> S {
        self.p_start
    }

    pub fn last(&self) -> &PathPoint<S> {
        &self.state.point
    }

    /// Builds the state at a solved point, continuing `v` and `g` from the current state.
    pub fn state_at(&self, u: Vec<S>, p: S) -> Result<StepState<S>, TrackerError> {
        StepState::at(
            self.sys,
            u,
            p,
            self.state.point.index + 1,
            &self.calib,
            self.config.eigen_side,
            Some(&self.state.v),
            Some(self.state.g),
        )
    }

    fn solve_once(&mut self, h: S) -> Result<AugmentedStep<S>, TrackerError> {
        self.stats.solves += 1;
        match newton_step_augmented(self.sys, &self.state, h, &self.config) {
            Ok(step) => Ok(step),
            Err(TrackerError::NeedsInflation(_)) => {
                let aug = AugmentedSystem { sys: self.sys, state: &self.state, h };
                let mut w = self.state.point.u.clone();
                w.push(self.state.point.p + h * self.state.s);
                let out = inflated_newton(&aug, &w, S::zero(), &self.config.inflation()).map_err(|e| match e {
                    InflationError::Model(m) => TrackerError::Model(m),
                    other => TrackerError::NeedsInflation(other.to_string()),
                })?;
                self.stats.inflation_steps += 1;
                let n = w.len() - 1;
                let p = out.u[n];
                let u = out.u[..n].to_vec();
                let residual = norm2(&evaluate(self.sys, &u, p)?);
                Ok(AugmentedStep { u, p, residual, iterations: out.iterations })
            }
            Err(e) => Err(e),
        }
    }

    /// Solves one step of size `h` without committing it. Failures (and
    /// parameter steps against the sign of `h` while `s > 0`) halve the step.
    pub fn try_step(&mut self, h: S) -> Result<StepState<S>, TrackerError> {
        let mut hk = h;
        for k in 0..=self.config.max_step_halvings {
            if k > 0 {
                hk = hk * lit(0.5);
                self.stats.halvings += 1;
            }
            let Ok(step) = self.solve_once(hk) else { continue };
            let wrong_way = self.state.s > S::zero() && (step.p - self.state.point.p) * hk <= S::zero();
            if wrong_way || step.residual > self.config.newton_tol {
                continue;
            }
            return self.state_at(step.u, step.p);
        }
        Err(TrackerError::Stalled(self.config.max_step_halvings))
    }

    /// Appends a solved point and makes it the new base.
    pub fn commit(&mut self, state: StepState<S>) {
        self.stats.steps += 1;
        self.points.push(state.point.clone());
        self.state = state;
    }

    pub fn inside(&self, p: S) -> bool {
        self.bounds.0 <= p && p <= self.bounds.1
    }

    /// Steps until the parameter leaves the interval, the endgame zone is
    /// entered, `det F_u` changes sign, or a step stalls.
    pub fn run(&mut self) -> StopReason<S> {
        if self.check_direction && (self.config.p_end - self.p_start) * self.h < S::zero() {
            return StopReason::ReachedEnd;
        }
        while self.inside(self.state.point.p) {
            if self.stats.steps >= self.config.max_steps {
                return StopReason::MaxSteps;
            }
            let next = match self.try_step(self.h) {
                Ok(s) => s,
                Err(_) => return StopReason::Stalled,
            };
            if self.state.det_sign != 0 && next.det_sign != 0 && next.det_sign != self.state.det_sign {
                return StopReason::SignChange(Box::new(next));
            }
            let prev = self.state.point.lambda_min.abs();
            self.commit(next);
            if self.guard.as_ref().is_some_and(|g| g(&self.state.point)) {
                return StopReason::Guard;
            }
            let lam = self.state.point.lambda_min.abs();
            if lam < self.config.pse_zone * self.calib.lambda_tilde && lam < prev {
                return StopReason::PseZone;
            }
        }
        StopReason::ReachedEnd
    }
}

/// Result of [`track`].
#[derive(Clone, Debug)]
pub struct TrackOutcome<S> {
    pub points: Vec<PathPoint<S>>,
    pub stop: StopReason<S>,
    pub calibration: GenericCalibration<S>,
    pub stats: TrackStats,
}

/// Calibrates once, then runs the adaptive loop from `start`.
pub fn track<S: Scalar>(
    sys: &dyn ParametricSystem<S>,
    start: PathPoint<S>,
    config: &TrackerConfig<S>,
) -> Result<TrackOutcome<S>, TrackerError> {
    config.validate()?;
    let calib = calibrate(sys, &start, config)?;
    let mut tracker = Tracker::new(sys, start, calib.clone(), config.clone())?;
    let stop = tracker.run();
    Ok(TrackOutcome { points: tracker.points, stop, calibration: calib, stats: tracker.stats })
}

/// A start point for `u0` at `p0`, with its residual and eigenvalue filled in.
pub fn start_point<S: Scalar>(
    sys: &dyn ParametricSystem<S>,
    u0: Vec<S>,
    p0: S,
    side: EigenSide,
) -> Result<PathPoint<S>, TrackerError> {
    let residual = norm2(&evaluate(sys, &u0, p0)?);
    let lambda_min = lambda_at(sys, &u0, p0, side)?;
    Ok(PathPoint { u: u0, p: p0, lambda_min, residual, index: 0 })
}
