//! Trial-and-error continuation in `p`: Euler predictor, Newton corrector at
//! fixed `p`, halve on failure, double after repeated successes.

use crate::adaptive::{eigen_direction, EigenSide, PathPoint};
use crate::linalg::{norm2, LinalgError, Lu};
use crate::model::{evaluate, jacobian_p, jacobian_u, ModelError, ParametricSystem};
use crate::{lit, Scalar};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BaselineError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("singular Jacobian: {0}")]
    SingularMatrix(LinalgError),
    #[error("corrector did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("maximum number of steps ({0}) exceeded")]
    MaxStepsExceeded(usize),
    #[error("invalid baseline configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig<S> {
    pub h0: S,
    pub p_end: S,
    pub tol: S,
    pub corrector_cap: usize,
    pub grow_after: usize,
    pub min_h: S,
    pub max_steps: usize,
    /// Fill `lambda_min` on every accepted point (one eigen solve each).
    pub compute_lambda: bool,
}

impl<S: Scalar> BaselineConfig<S> {
    pub fn new(h0: S, p_end: S) -> Self {
        Self {
            h0,
            p_end,
            tol: lit(1e-10),
            corrector_cap: 10,
            grow_after: 3,
            min_h: lit(1e-9),
            max_steps: 100_000,
            compute_lambda: true,
        }
    }
}

/// `u0 + Δu` with `F_u Δu = −F_p dp`.
pub fn euler_predict<S: Scalar>(sys: &dyn ParametricSystem<S>, u0: &[S], p0: S, dp: S) -> Result<Vec<S>, BaselineError> {
    if dp == S::zero() {
        return Ok(u0.to_vec());
    }
    let lu = Lu::factor(&jacobian_u(sys, u0, p0)?).map_err(BaselineError::SingularMatrix)?;
    let rhs: Vec<S> = jacobian_p(sys, u0, p0)?.iter().map(|&x| -x * dp).collect();
    let du = lu.solve(&rhs);
    Ok(u0.iter().zip(&du).map(|(&a, &b)| a + b).collect())
}

/// Newton at fixed `p` until `‖F‖₂ ≤ tol`. A residual increase or the cap is a failure.
pub fn newton_correct<S: Scalar>(
    sys: &dyn ParametricSystem<S>,
    u_pred: &[S],
    p: S,
    tol: S,
    cap: usize,
) -> Result<(Vec<S>, usize), BaselineError> {
    let mut u = u_pred.to_vec();
    let mut prev = S::infinity();
    for it in 0..=cap {
        let f = evaluate(sys, &u, p)?;
        let r = norm2(&f);
        if r <= tol {
            return Ok((u, it));
        }
        if !(r < prev) || it == cap {
            return Err(BaselineError::NoConvergence { iterations: it });
        }
        prev = r;
        let lu = Lu::factor(&jacobian_u(sys, &u, p)?).map_err(BaselineError::SingularMatrix)?;
        let du = lu.solve(&f);
        for (a, d) in u.iter_mut().zip(&du) {
            *a = *a - *d;
        }
    }
    Err(BaselineError::NoConvergence { iterations: cap })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineStop {
    ReachedEnd,
    /// `|h|` fell below `min_h`; the last point is the bifurcation estimate.
    Stagnated,
    MaxSteps,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineOutcome<S> {
    pub points: Vec<PathPoint<S>>,
    pub stop: BaselineStop,
    /// Accepted steps.
    pub steps: usize,
    /// Predictor-corrector attempts, accepted or not.
    pub attempts: usize,
    pub final_h: S,
}

fn make_point<S: Scalar>(
    sys: &dyn ParametricSystem<S>,
    u: Vec<S>,
    p: S,
    index: usize,
    lambda: bool,
) -> Result<PathPoint<S>, BaselineError> {
    let residual = norm2(&evaluate(sys, &u, p)?);
    let lambda_min = if lambda {
        eigen_direction(&jacobian_u(sys, &u, p)?, EigenSide::Right).map(|e| e.0).unwrap_or(S::nan())
    } else {
        S::nan()
    };
    Ok(PathPoint { u, p, lambda_min, residual, index })
}

pub fn track_trial_and_error<S: Scalar>(
    sys: &dyn ParametricSystem<S>,
    u0: &[S],
    p0: S,
    config: &BaselineConfig<S>,
) -> Result<BaselineOutcome<S>, BaselineError> {
    if config.h0 == S::zero() || !(config.min_h > S::zero()) {
        return Err(BaselineError::InvalidConfig("h0 must be nonzero and min_h positive".into()));
    }
    let hmax = config.h0.abs();
    let mut h = config.h0;
    let mut points = vec![make_point(sys, u0.to_vec(), p0, 0, config.compute_lambda)?];
    let (mut u, mut p) = (u0.to_vec(), p0);
    let (mut steps, mut attempts, mut streak) = (0usize, 0usize, 0usize);
    let inside = |p: S| (p - p0) * (p - config.p_end) <= S::zero();
    let stop = loop {
        if steps > 0 && !inside(p) {
            break BaselineStop::ReachedEnd;
        }
        if h.abs() < config.min_h {
            break BaselineStop::Stagnated;
        }
        if steps >= config.max_steps {
            break BaselineStop::MaxSteps;
        }
        attempts += 1;
        let p_next = p + h;
        let corrected = euler_predict(sys, &u, p, h)
            .and_then(|pred| newton_correct(sys, &pred, p_next, config.tol, config.corrector_cap));
        match corrected {
            Ok((un, _)) => {
                u = un;
                p = p_next;
                steps += 1;
                streak += 1;
                points.push(make_point(sys, u.clone(), p, steps, config.compute_lambda)?);
                if streak >= config.grow_after {
                    h = h.signum() * (h.abs() * lit(2.0)).min(hmax);
                    streak = 0;
                }
            }
            Err(BaselineError::Model(e)) => return Err(e.into()),
            Err(_) => {
                h = h * lit(0.5);
                streak = 0;
            }
        }
    };
    Ok(BaselineOutcome { points, stop, steps, attempts, final_h: h })
}
