//! Branch directions at a singular point from the quadratic part of the
//! system restricted to `null([J_u, J_p])`.

use crate::inflation::{inflated_newton, InflationConfig};
use crate::linalg::{dot, left_null_space_with, norm2, null_space_with, DenseMatrix, RankCutoff};
use crate::model::{evaluate, jacobian_p, jacobian_u, ModelError, ParametricSystem};
use crate::{lit, Scalar};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ConeError {
    /// The point is regular or a fold; the single unit tangent `(Δu, Δp)` is attached.
    #[error("null space of [J_u, J_p] is one-dimensional: not a bifurcation")]
    NotABifurcation { tangent: Vec<f64> },
    #[error("null space dimension {0} is not supported (only corank one)")]
    UnsupportedCorank(usize),
    #[error("no seed converged onto a branch")]
    NoBranchFound,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// `A = [J_u, J_p]` with an orthonormal basis `(Q1; q1), (Q2; q2)` of its
/// null space and the left null vector `Λ`.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentFrame<S> {
    pub a: DenseMatrix<S>,
    pub q1: Vec<S>,
    pub q1_p: S,
    pub q2: Vec<S>,
    pub q2_p: S,
    pub lambda: Vec<S>,
}

impl<S: Scalar> TangentFrame<S> {
    /// `(a1 Q1 + a2 Q2, a1 q1 + a2 q2)`.
    pub fn combine(&self, a1: S, a2: S) -> (Vec<S>, S) {
        let du = self.q1.iter().zip(&self.q2).map(|(&x, &y)| a1 * x + a2 * y).collect();
        (du, a1 * self.q1_p + a2 * self.q2_p)
    }
}

/// `A = [J_u, J_p]` at `(u, p)`.
pub fn extended_jacobian<S: Scalar>(sys: &dyn ParametricSystem<S>, u: &[S], p: S) -> Result<DenseMatrix<S>, ModelError> {
    let n = u.len();
    let ju = jacobian_u(sys, u, p)?;
    let jp = jacobian_p(sys, u, p)?;
    let mut a = DenseMatrix::zeros(n, n + 1);
    for i in 0..n {
        a.row_mut(i)[..n].copy_from_slice(ju.row(i));
        a[(i, n)] = jp[i];
    }
    Ok(a)
}

pub fn build_frame<S: Scalar>(
    sys: &dyn ParametricSystem<S>,
    u_b: &[S],
    p_b: S,
    cutoff: RankCutoff<S>,
) -> Result<TangentFrame<S>, ConeError> {
    let n = u_b.len();
    let a = extended_jacobian(sys, u_b, p_b)?;
    let null = null_space_with(&a, cutoff);
    match null.len() {
        2 => {}
        1 => {
            return Err(ConeError::NotABifurcation { tangent: null[0].iter().map(|&x| crate::to_f64(x)).collect() });
        }
        k => return Err(ConeError::UnsupportedCorank(k)),
    }
    let lambda = left_null_space_with(&a, cutoff).into_iter().next().unwrap_or_else(|| vec![S::zero(); n]);
    Ok(TangentFrame {
        q1: null[0][..n].to_vec(),
        q1_p: null[0][n],
        q2: null[1][..n].to_vec(),
        q2_p: null[1][n],
        a,
        lambda,
    })
}

/// Hessian of `g(a) = Λᵀ F(u_b + a1 Q1 + a2 Q2, p_b + a1 q1 + a2 q2)` at the
/// origin, with `g(0)` and `∇g(0)` as diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticModel<S> {
    pub h: [[S; 2]; 2],
    pub g0: S,
    pub grad: [S; 2],
}

pub fn quadratic_model<S: Scalar>(
    sys: &dyn ParametricSystem<S>,
    frame: &TangentFrame<S>,
    u_b: &[S],
    p_b: S,
) -> Result<QuadraticModel<S>, ModelError> {
    let step = lit::<S>(1e-4) * S::one().max(norm2(u_b));
    quadratic_model_with_step(sys, frame, u_b, p_b, step)
}

/// Central differences on a 3×3 stencil of step `d`.
pub fn quadratic_model_with_step<S: Scalar>(
    sys: &dyn ParametricSystem<S>,
    frame: &TangentFrame<S>,
    u_b: &[S],
    p_b: S,
    d: S,
) -> Result<QuadraticModel<S>, ModelError> {
    let g = |i: i32, j: i32| -> Result<S, ModelError> {
        let (du, dp) = frame.combine(d * lit(i as f64), d * lit(j as f64));
        let u: Vec<S> = u_b.iter().zip(&du).map(|(&a, &b)| a + b).collect();
        Ok(dot(&frame.lambda, &evaluate(sys, &u, p_b + dp)?))
    };
    let mut v = [[S::zero(); 3]; 3];
    for (i, row) in v.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = g(i as i32 - 1, j as i32 - 1)?;
        }
    }
    let d2 = d * d;
    let two = lit::<S>(2.0);
    let h11 = (v[2][1] - two * v[1][1] + v[0][1]) / d2;
    let h22 = (v[1][2] - two * v[1][1] + v[1][0]) / d2;
    let h12 = (v[2][2] - v[2][0] - v[0][2] + v[0][0]) / (lit::<S>(4.0) * d2);
    Ok(QuadraticModel {
        h: [[h11, h12], [h12, h22]],
        g0: v[1][1],
        grad: [(v[2][1] - v[0][1]) / (two * d), (v[1][2] - v[1][0]) / (two * d)],
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentDirection<S> {
    pub a: [S; 2],
    pub delta_u: Vec<S>,
    pub delta_p: S,
}

impl<S: Scalar> TangentDirection<S> {
    /// `(Δu, Δp)` as one vector.
    pub fn stacked(&self) -> Vec<S> {
        let mut w = self.delta_u.clone();
        w.push(self.delta_p);
        w
    }

    pub fn negated(&self) -> Self {
        Self {
            a: [-self.a[0], -self.a[1]],
            delta_u: self.delta_u.iter().map(|&x| -x).collect(),
            delta_p: -self.delta_p,
        }
    }

    pub fn to_f64(&self) -> TangentDirection<f64> {
        let f = crate::to_f64::<S>;
        TangentDirection { a: [f(self.a[0]), f(self.a[1])], delta_u: self.delta_u.iter().map(|&x| f(x)).collect(), delta_p: f(self.delta_p) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeKind {
    TwoLines,
    OneLine,
    /// Definite form: no real direction.
    Complex,
}

/// Real solutions of `aᵀ H a = 0`, one unit direction per orientation.
pub fn cone_directions<S: Scalar>(h: &[[S; 2]; 2], frame: &TangentFrame<S>) -> (ConeKind, Vec<TangentDirection<S>>) {
    let (h11, h12, h22) = (h[0][0], h[0][1], h[1][1]);
    let scale = h11.abs().max(h12.abs()).max(h22.abs());
    if scale == S::zero() {
        return (ConeKind::Complex, Vec::new());
    }
    let disc = h12 * h12 - h11 * h22;
    let eps = lit::<S>(1e-10) * scale * scale;
    let (kind, roots) = if disc < -eps {
        return (ConeKind::Complex, Vec::new());
    } else if disc <= eps {
        (ConeKind::OneLine, vec![S::zero()])
    } else {
        let r = disc.sqrt();
        (ConeKind::TwoLines, vec![r, -r])
    };
    let mut out = Vec::new();
    for r in roots {
        // Solve along the larger diagonal entry so the ratio stays bounded.
        let tiny = lit::<S>(1e-12) * scale;
        let (mut a1, mut a2) = if h11.abs() <= tiny && h22.abs() <= tiny {
            // Pure cross term: the cone is the two coordinate axes.
            if r > S::zero() { (S::one(), S::zero()) } else { (S::zero(), S::one()) }
        } else if h11.abs() >= h22.abs() {
            ((-h12 + r) / h11, S::one())
        } else {
            (S::one(), (-h12 + r) / h22)
        };
        let nrm = (a1 * a1 + a2 * a2).sqrt();
        a1 = a1 / nrm;
        a2 = a2 / nrm;
        let (mut du, mut dp) = frame.combine(a1, a2);
        let len = (dot(&du, &du) + dp * dp).sqrt();
        du.iter_mut().for_each(|x| *x = *x / len);
        dp = dp / len;
        let d = TangentDirection { a: [a1 / len, a2 / len], delta_u: du, delta_p: dp };
        out.push(d.clone());
        out.push(d.negated());
    }
    (kind, out)
}

/// `G(w) = [F(u, p); dᵀ(w − w_pred)]` on `w = (u, p)`.
struct PinnedSystem<'a, S> {
    sys: &'a dyn ParametricSystem<S>,
    d: Vec<S>,
    w_pred: Vec<S>,
}

impl<S: Scalar> ParametricSystem<S> for PinnedSystem<'_, S> {
    fn name(&self) -> &str {
        "pinned"
    }
    fn dim(&self) -> usize {
        self.d.len()
    }
    fn eval_into(&self, w: &[S], _p: S, out: &mut [S]) {
        let n = w.len() - 1;
        self.sys.eval_into(&w[..n], w[n], &mut out[..n]);
        out[n] = self.d.iter().zip(w.iter().zip(&self.w_pred)).map(|(&d, (&a, &b))| d * (a - b)).sum();
    }
    fn analytic_jacobian_u(&self, w: &[S], _p: S) -> Option<DenseMatrix<S>> {
        let n = w.len() - 1;
        let a = extended_jacobian(self.sys, &w[..n], w[n]).ok()?;
        let mut m = DenseMatrix::zeros(n + 1, n + 1);
        for i in 0..n {
            m.row_mut(i).copy_from_slice(a.row(i));
        }
        m.row_mut(n).copy_from_slice(&self.d);
        Some(m)
    }
    fn analytic_jacobian_p(&self, w: &[S], _p: S) -> Option<Vec<S>> {
        Some(vec![S::zero(); w.len()])
    }
}

/// A corrected point on an outgoing branch.
#[derive(Clone, Debug, PartialEq)]
pub struct Seed<S> {
    /// Index into the direction list passed to [`seed_branches`].
    pub direction: usize,
    pub u: Vec<S>,
    pub p: S,
    pub residual: S,
}

impl<S: Scalar> Seed<S> {
    pub fn stacked(&self) -> Vec<S> {
        let mut w = self.u.clone();
        w.push(self.p);
        w
    }
}

/// Cosine of the largest angle at which a seed counts as the incoming branch.
const INCOMING_COS: f64 = 0.984_807_753_012_208; // cos 10°

/// Predicts `(u_b, p_b) + h_branch·d` for every direction and corrects it
/// with the inflated Newton method on the pinned system. Seeds that stay on
/// the bifurcation point, duplicate an earlier seed, or point back along
/// `incoming` (the vector from the bifurcation to the last tracked point)
/// are dropped. If no seed lies within 10° of `incoming`, the closest one is
/// dropped instead.
pub fn seed_branches<S: Scalar>(
    sys: &dyn ParametricSystem<S>,
    u_b: &[S],
    p_b: S,
    directions: &[TangentDirection<S>],
    h_branch: S,
    incoming: Option<&[S]>,
    inflation: &InflationConfig<S>,
) -> Result<Vec<Seed<S>>, ConeError> {
    let mut wb = u_b.to_vec();
    wb.push(p_b);
    let scale = S::one().max(norm2(&wb));
    let tiny = lit::<S>(1e-8) * scale;
    let mut seeds: Vec<Seed<S>> = Vec::new();
    let mut attempted = 0;
    for (k, d) in directions.iter().enumerate() {
        let dv = d.stacked();
        let w_pred: Vec<S> = wb.iter().zip(&dv).map(|(&a, &b)| a + h_branch * b).collect();
        attempted += 1;
        let pinned = PinnedSystem { sys, d: dv, w_pred: w_pred.clone() };
        let Ok(out) = inflated_newton(&pinned, &w_pred, S::zero(), inflation) else { continue };
        let n = u_b.len();
        let residual = norm2(&evaluate(sys, &out.u[..n], out.u[n])?);
        if residual > inflation.newton_tol {
            continue;
        }
        let disp: Vec<S> = out.u.iter().zip(&wb).map(|(&a, &b)| a - b).collect();
        if norm2(&disp) <= tiny {
            continue;
        }
        let dup = seeds.iter().any(|s| norm2(&crate::linalg::sub(&s.stacked(), &out.u)) <= tiny);
        if dup {
            continue;
        }
        seeds.push(Seed { direction: k, u: out.u[..n].to_vec(), p: out.u[n], residual });
    }
    if attempted > 0 && seeds.is_empty() && h_branch != S::zero() {
        return Err(ConeError::NoBranchFound);
    }
    if let Some(inc) = incoming {
        let ni = norm2(inc);
        if ni > S::zero() && !seeds.is_empty() {
            let cosines: Vec<S> = seeds
                .iter()
                .map(|s| {
                    let disp: Vec<S> = s.stacked().iter().zip(&wb).map(|(&a, &b)| a - b).collect();
                    dot(&disp, inc) / (norm2(&disp) * ni)
                })
                .collect();
            let before = seeds.len();
            let keep: Vec<bool> = cosines.iter().map(|&c| c < lit(INCOMING_COS)).collect();
            let mut it = keep.iter();
            seeds.retain(|_| *it.next().expect("same length"));
            if seeds.len() == before {
                let worst = (0..cosines.len())
                    .max_by(|&a, &b| cosines[a].partial_cmp(&cosines[b]).unwrap_or(std::cmp::Ordering::Equal))
                    .expect("nonempty");
                seeds.remove(worst);
            }
        }
    }
    Ok(seeds)
}
