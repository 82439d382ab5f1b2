//! Puiseux-series endgame: fits `y(λ) = y_b + Σ_j a_j λ^{e_j}` to samples
//! approaching a singular point, picks the winding number by holdout and
//! extrapolates to `λ = 0`.

use crate::linalg::{dot, least_squares, norm_inf, singular_values, DenseMatrix};
use crate::model::{residual_norm, ParametricSystem};
use crate::tangent_cone::TangentDirection;
use crate::{from_usize, lit, Scalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PseError {
    #[error("no exponent root: ratio m = {m} is outside the attainable range")]
    NoRoot { m: f64 },
    #[error("ill-conditioned fit (condition estimate {condition:e})")]
    IllConditionedFit { condition: f64 },
    #[error("every winding candidate failed")]
    AllCandidatesFailed,
    #[error("need at least {need} samples, have {have}")]
    NotEnoughSamples { need: usize, have: usize },
    #[error("endgame did not converge after {rounds} rounds")]
    NoConvergence { rounds: usize, best: Box<BifurcationRecord<f64>> },
}

/// A tracked point inside the endgame zone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndgameSample<S> {
    /// `|Re λ|` of the smallest eigenvalue.
    pub lambda: S,
    pub u: Vec<S>,
    pub p: S,
}

/// Root of `f(x) = 1 − k1^x − m(1 − k2^x)` on `(0, 10]` with
/// `m = (y0 − y1)/(y0 − y2)`, where `y0 = y(λ)`, `y1 = y(k1 λ)`, `y2 = y(k2 λ)`.
pub fn estimate_leading_exponent<S: Scalar>(y0: S, y1: S, y2: S, k1: S, k2: S) -> Result<S, PseError> {
    let den = y0 - y2;
    if den == S::zero() {
        return Err(PseError::NoRoot { m: f64::NAN });
    }
    let m = (y0 - y1) / den;
    // (1 − k1^x)/(1 − k2^x) is monotone in x, so f changes sign at most once.
    let ratio = |x: S| (S::one() - k1.powf(x)) / (S::one() - k2.powf(x)) - m;
    let (mut lo, mut hi) = (lit::<S>(1e-9), lit::<S>(10.0));
    let (flo, fhi) = (ratio(lo), ratio(hi));
    if !(flo * fhi <= S::zero()) {
        return Err(PseError::NoRoot { m: crate::to_f64(m) });
    }
    let rising = flo < fhi;
    for _ in 0..200 {
        let mid = (lo + hi) * lit(0.5);
        if hi - lo <= lit::<S>(1e-12) {
            break;
        }
        if (ratio(mid) < S::zero()) == rising {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) * lit(0.5))
}

/// Monotone piecewise-cubic (Fritsch–Carlson) interpolant through
/// `(xs, ys)` with `xs` strictly increasing, evaluated at `x`. Outside the
/// data range the end intervals are extended linearly.
pub fn pchip<S: Scalar>(xs: &[S], ys: &[S], x: S) -> S {
    let n = xs.len();
    assert!(n >= 2 && ys.len() == n, "pchip needs at least two points");
    let h: Vec<S> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let del: Vec<S> = (0..n - 1).map(|k| (ys[k + 1] - ys[k]) / h[k]).collect();
    let mut d = vec![S::zero(); n];
    if n == 2 {
        d[0] = del[0];
        d[1] = del[0];
    } else {
        let two = lit::<S>(2.0);
        for k in 1..n - 1 {
            if del[k - 1] * del[k] > S::zero() {
                let w1 = two * h[k] + h[k - 1];
                let w2 = h[k] + two * h[k - 1];
                d[k] = (w1 + w2) / (w1 / del[k - 1] + w2 / del[k]);
            }
        }
        let end = |h0: S, h1: S, d0: S, d1: S| {
            let mut e = ((two * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
            if e * d0 <= S::zero() {
                e = S::zero();
            } else if d0 * d1 <= S::zero() && e.abs() > lit::<S>(3.0) * d0.abs() {
                e = lit::<S>(3.0) * d0;
            }
            e
        };
        d[0] = end(h[0], h[1], del[0], del[1]);
        d[n - 1] = end(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
    }
    if x <= xs[0] {
        return ys[0] + d[0] * (x - xs[0]);
    }
    if x >= xs[n - 1] {
        return ys[n - 1] + d[n - 1] * (x - xs[n - 1]);
    }
    let k = xs.windows(2).position(|w| x <= w[1]).unwrap_or(n - 2);
    let t = (x - xs[k]) / h[k];
    let (t2, t3) = (t * t, t * t * t);
    let two = lit::<S>(2.0);
    let three = lit::<S>(3.0);
    let h00 = two * t3 - three * t2 + S::one();
    let h10 = t3 - two * t2 + t;
    let h01 = -two * t3 + three * t2;
    let h11 = t3 - t2;
    h00 * ys[k] + h10 * h[k] * d[k] + h01 * ys[k + 1] + h11 * h[k] * d[k + 1]
}

/// `y(λ) ≈ constant + Σ_j coefs[j] λ^{exponents[j]}`, componentwise.
#[derive(Clone, Debug, PartialEq)]
pub struct PuiseuxModel<S> {
    pub c: usize,
    pub exponents: Vec<S>,
    pub constant: Vec<S>,
    /// `coefs[j]` multiplies `λ^{exponents[j]}`.
    pub coefs: Vec<Vec<S>>,
    /// Largest per-component least-squares residual 2-norm.
    pub residual: S,
}

impl<S: Scalar> PuiseuxModel<S> {
    pub fn evaluate(&self, lambda: S) -> Vec<S> {
        let mut y = self.constant.clone();
        for (e, a) in self.exponents.iter().zip(&self.coefs) {
            let w = lambda.powf(*e);
            for (yi, &ai) in y.iter_mut().zip(a) {
                *yi = *yi + ai * w;
            }
        }
        y
    }

    /// Leading exponent of the series.
    pub fn leading(&self) -> S {
        self.exponents.first().copied().unwrap_or(S::one())
    }
}

const MAX_CONDITION: f64 = 1e12;

/// Least squares with an explicit exponent list. Columns are scaled to unit
/// max before the condition check so a rescaled `λ` gives the same verdict.
pub fn fit_with_exponents<S: Scalar>(lambdas: &[S], ys: &[Vec<S>], c: usize, exponents: &[S]) -> Result<PuiseuxModel<S>, PseError> {
    let m = lambdas.len();
    let k = exponents.len() + 1;
    if m < k {
        return Err(PseError::NotEnoughSamples { need: k, have: m });
    }
    let mut a = DenseMatrix::from_fn(m, k, |i, j| if j == 0 { S::one() } else { lambdas[i].powf(exponents[j - 1]) });
    let mut scale = vec![S::one(); k];
    for (j, sc) in scale.iter_mut().enumerate() {
        let mx = (0..m).fold(S::zero(), |acc, i| acc.max(a[(i, j)].abs()));
        if mx > S::zero() {
            *sc = mx;
            for i in 0..m {
                a[(i, j)] = a[(i, j)] / mx;
            }
        }
    }
    let sv = singular_values(&a).map_err(|_| PseError::IllConditionedFit { condition: f64::INFINITY })?;
    let smin = *sv.last().expect("nonempty design");
    let cond = if smin > S::zero() { crate::to_f64(sv[0] / smin) } else { f64::INFINITY };
    if !(cond <= MAX_CONDITION) {
        return Err(PseError::IllConditionedFit { condition: cond });
    }
    let dim = ys[0].len();
    let mut constant = vec![S::zero(); dim];
    let mut coefs = vec![vec![S::zero(); dim]; k - 1];
    let mut residual = S::zero();
    for comp in 0..dim {
        let b: Vec<S> = ys.iter().map(|y| y[comp]).collect();
        let (x, r) = least_squares(&a, &b).map_err(|_| PseError::IllConditionedFit { condition: cond })?;
        constant[comp] = x[0] / scale[0];
        for j in 1..k {
            coefs[j - 1][comp] = x[j] / scale[j];
        }
        residual = residual.max(r);
    }
    Ok(PuiseuxModel { c, exponents: exponents.to_vec(), constant, coefs, residual })
}

/// Fit with the plain basis `λ^{j/c}`, `j = 1..=terms`.
pub fn fit_puiseux<S: Scalar>(lambdas: &[S], ys: &[Vec<S>], c: usize, terms: usize) -> Result<PuiseuxModel<S>, PseError> {
    fit_with_leading(lambdas, ys, c, terms, 1)
}

/// Basis `λ^{(w+k)/c}`, `k = 0..terms`, for a known leading numerator `w`.
pub fn fit_with_leading<S: Scalar>(lambdas: &[S], ys: &[Vec<S>], c: usize, terms: usize, w: usize) -> Result<PuiseuxModel<S>, PseError> {
    let cs = from_usize::<S>(c);
    let exps: Vec<S> = (0..terms).map(|k| from_usize::<S>(w + k) / cs).collect();
    fit_with_exponents(lambdas, ys, c, &exps)
}

/// Leading numerator for winding `c` given an exponent estimate.
fn leading_numerator<S: Scalar>(hint: Option<S>, c: usize) -> usize {
    match hint {
        Some(x) if x.is_finite() && x > S::zero() => {
            let w = (x * from_usize::<S>(c)).round();
            w.to_usize().unwrap_or(1).max(1)
        }
        _ => 1,
    }
}

/// Result of [`select_winding`].
#[derive(Clone, Debug, PartialEq)]
pub struct WindingChoice<S> {
    pub c: usize,
    /// Refit on every sample with the chosen winding.
    pub model: PuiseuxModel<S>,
    pub holdout_error: S,
    /// `(c, holdout error)` for every candidate that produced a fit.
    pub candidates: Vec<(usize, S)>,
}

/// For `c = 1..=max_c`: fit on every sample but the one with the smallest
/// `λ`, predict it, keep the `c` with the smallest max-norm error (near ties
/// go to the smaller `c`). `hint` is a leading-exponent estimate; each
/// candidate's basis starts at `round(hint·c)/c`.
pub fn select_winding<S: Scalar>(
    lambdas: &[S],
    ys: &[Vec<S>],
    max_c: usize,
    terms: usize,
    hint: Option<S>,
) -> Result<WindingChoice<S>, PseError> {
    let n = lambdas.len();
    if n < terms + 2 {
        return Err(PseError::NotEnoughSamples { need: terms + 2, have: n });
    }
    let hold = (0..n)
        .min_by(|&a, &b| lambdas[a].partial_cmp(&lambdas[b]).unwrap_or(std::cmp::Ordering::Equal))
        .expect("nonempty");
    let fit_l: Vec<S> = (0..n).filter(|&i| i != hold).map(|i| lambdas[i]).collect();
    let fit_y: Vec<Vec<S>> = (0..n).filter(|&i| i != hold).map(|i| ys[i].clone()).collect();
    let yscale = ys.iter().fold(S::one(), |m, y| m.max(norm_inf(y)));
    let tie = lit::<S>(1e-10) * yscale;
    let mut candidates = Vec::new();
    let mut best: Option<(usize, S)> = None;
    for c in 1..=max_c {
        let w = leading_numerator(hint, c);
        let Ok(model) = fit_with_leading(&fit_l, &fit_y, c, terms, w) else { continue };
        let pred = model.evaluate(lambdas[hold]);
        let err = norm_inf(&crate::linalg::sub(&pred, &ys[hold]));
        if !err.is_finite() {
            continue;
        }
        candidates.push((c, err));
        if best.map_or(true, |(_, b)| err < b - tie) {
            best = Some((c, err));
        }
    }
    let (c, holdout_error) = best.ok_or(PseError::AllCandidatesFailed)?;
    let model = fit_with_leading(lambdas, ys, c, terms, leading_numerator(hint, c))?;
    Ok(WindingChoice { c, model, holdout_error, candidates })
}

/// What the point turned out to be once the tangent cone was examined.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PointKind {
    #[default]
    Unclassified,
    Bifurcation,
    Fold,
    /// Null space of dimension two but no real cone directions.
    ComplexCone,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BifurcationRecord<S> {
    pub u_b: Vec<S>,
    pub p_b: S,
    /// Winding chosen for the state series.
    pub c1: usize,
    /// Winding chosen for the parameter series.
    pub c2: usize,
    /// Leading exponents of the fitted series.
    pub exponent_u: S,
    pub exponent_p: S,
    /// Larger of the state and parameter holdout errors.
    pub holdout_error: S,
    pub samples_used: usize,
    pub rounds: usize,
    pub converged: bool,
    /// `‖F(u_b, p_b)‖₂`.
    pub residual: S,
    pub kind: PointKind,
    pub directions: Vec<TangentDirection<S>>,
    /// Branch the record was found on.
    pub branch: usize,
}

impl<S: Scalar> BifurcationRecord<S> {
    pub fn to_f64(&self) -> BifurcationRecord<f64> {
        let f = crate::to_f64::<S>;
        BifurcationRecord {
            u_b: self.u_b.iter().map(|&x| f(x)).collect(),
            p_b: f(self.p_b),
            c1: self.c1,
            c2: self.c2,
            exponent_u: f(self.exponent_u),
            exponent_p: f(self.exponent_p),
            holdout_error: f(self.holdout_error),
            samples_used: self.samples_used,
            rounds: self.rounds,
            converged: self.converged,
            residual: f(self.residual),
            kind: self.kind,
            directions: self.directions.iter().map(|d| d.to_f64()).collect(),
            branch: self.branch,
        }
    }

    /// Max-norm distance between the `(u_b, p_b)` of two records.
    pub fn distance(&self, other: &Self) -> S {
        let du = norm_inf(&crate::linalg::sub(&self.u_b, &other.u_b));
        du.max((self.p_b - other.p_b).abs())
    }
}

#[derive(Clone, Debug)]
pub struct PseConfig<S> {
    pub winding_max: usize,
    pub k1: S,
    pub k2: S,
    /// Cauchy tolerance on successive extrapolates, relative to `max(1, ‖(u_b, p_b)‖∞)`.
    pub tol: S,
    pub rounds: usize,
    pub seed: u64,
    /// Most recent samples used per fit.
    pub window: usize,
}

impl<S: Scalar> Default for PseConfig<S> {
    fn default() -> Self {
        Self { winding_max: 6, k1: lit(0.5), k2: lit(0.25), tol: lit(1e-6), rounds: 12, seed: 0, window: 8 }
    }
}

/// Exponent estimate for a scalar series sampled at `lambdas` (ascending).
/// When the samples span less than `1/k2`, the ratios shrink to fit the span.
fn exponent_hint<S: Scalar>(lambdas: &[S], ys: &[S], k1: S, k2: S) -> Option<S> {
    if lambdas.len() < 3 {
        return None;
    }
    let lo = lambdas[0];
    let top = *lambdas.last().expect("nonempty");
    let (mut k1, mut k2) = (k1.max(k2), k1.min(k2));
    if lo / top > k2 {
        k2 = lo / top;
        k1 = k2.sqrt();
    }
    let y0 = pchip(lambdas, ys, top);
    let y1 = pchip(lambdas, ys, k1 * top);
    let y2 = pchip(lambdas, ys, k2 * top);
    estimate_leading_exponent(y0, y1, y2, k1, k2).ok()
}

/// One extrapolation to `λ = 0` from the most recent samples.
pub fn extrapolate<S: Scalar>(samples: &[EndgameSample<S>], alpha: &[S], config: &PseConfig<S>) -> Result<BifurcationRecord<S>, PseError> {
    let start = samples.len().saturating_sub(config.window.max(3));
    let mut win: Vec<&EndgameSample<S>> = samples[start..].iter().collect();
    if win.len() < 3 {
        return Err(PseError::NotEnoughSamples { need: 3, have: win.len() });
    }
    win.sort_by(|a, b| a.lambda.partial_cmp(&b.lambda).unwrap_or(std::cmp::Ordering::Equal));
    let lambdas: Vec<S> = win.iter().map(|s| s.lambda).collect();
    let terms = (win.len() - 2).min(6);
    let proj: Vec<S> = win.iter().map(|s| dot(alpha, &s.u)).collect();
    let ps: Vec<S> = win.iter().map(|s| s.p).collect();
    let hint_u = exponent_hint(&lambdas, &proj, config.k1, config.k2);
    let hint_p = exponent_hint(&lambdas, &ps, config.k1, config.k2);
    let uy: Vec<Vec<S>> = win.iter().map(|s| s.u.clone()).collect();
    let py: Vec<Vec<S>> = ps.iter().map(|&p| vec![p]).collect();
    let cu = select_winding(&lambdas, &uy, config.winding_max, terms, hint_u)?;
    let cp = select_winding(&lambdas, &py, config.winding_max, terms, hint_p)?;
    Ok(BifurcationRecord {
        u_b: cu.model.constant.clone(),
        p_b: cp.model.constant[0],
        c1: cu.c,
        c2: cp.c,
        exponent_u: cu.model.leading(),
        exponent_p: cp.model.leading(),
        holdout_error: cu.holdout_error.max(cp.holdout_error),
        samples_used: win.len(),
        rounds: 0,
        converged: false,
        residual: S::nan(),
        kind: PointKind::Unclassified,
        directions: Vec::new(),
        branch: 0,
    })
}

/// Random unit vector for projecting the state series, drawn from `seed`.
pub fn projection_vector<S: Scalar>(n: usize, seed: u64) -> Vec<S> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_a1fa);
    let mut a: Vec<S> = (0..n).map(|_| lit::<S>(rng.gen::<f64>() - 0.5)).collect();
    crate::linalg::normalize(&mut a);
    a
}

/// Outcome of the refinement loop, converged or not.
#[derive(Clone, Debug)]
pub struct Refinement<S> {
    pub record: BifurcationRecord<S>,
    pub samples: Vec<EndgameSample<S>>,
    /// Samples obtained from the generator.
    pub generated: usize,
}

/// Repeats extrapolation, asking `next_sample(λ_N/2)` for a new sample
/// after each round, until two successive extrapolates agree or the round
/// cap is reached. A sample that fails to lower `λ` ends the loop.
pub fn refine<S: Scalar>(
    sys: &dyn ParametricSystem<S>,
    mut samples: Vec<EndgameSample<S>>,
    next_sample: &mut dyn FnMut(S) -> Option<EndgameSample<S>>,
    config: &PseConfig<S>,
) -> Result<Refinement<S>, PseError> {
    let n = samples.first().map(|s| s.u.len()).unwrap_or(0);
    let alpha = projection_vector::<S>(n, config.seed);
    let mut prev: Option<BifurcationRecord<S>> = None;
    let mut generated = 0;
    for round in 0..=config.rounds {
        let mut rec = extrapolate(&samples, &alpha, config)?;
        rec.rounds = round;
        rec.residual = residual_norm(sys, &rec.u_b, rec.p_b).unwrap_or(S::nan());
        if let Some(pr) = &prev {
            let scale = S::one().max(norm_inf(&rec.u_b)).max(rec.p_b.abs());
            if rec.distance(pr) <= config.tol * scale {
                rec.converged = true;
                return Ok(Refinement { record: rec, samples, generated });
            }
        }
        let last = samples.iter().map(|s| s.lambda).fold(S::infinity(), |a, b| a.min(b));
        let stop = round == config.rounds;
        prev = Some(rec);
        if stop {
            break;
        }
        match next_sample(last * lit(0.5)) {
            Some(s) if s.lambda < last => {
                samples.push(s);
                generated += 1;
            }
            _ => break,
        }
    }
    Ok(Refinement { record: prev.expect("at least one round ran"), samples, generated })
}

/// [`refine`] that reports a non-converged loop as an error carrying the last record.
pub fn refine_bifurcation<S: Scalar>(
    sys: &dyn ParametricSystem<S>,
    samples: Vec<EndgameSample<S>>,
    next_sample: &mut dyn FnMut(S) -> Option<EndgameSample<S>>,
    config: &PseConfig<S>,
) -> Result<(BifurcationRecord<S>, Vec<EndgameSample<S>>), PseError> {
    let out = refine(sys, samples, next_sample, config)?;
    if out.record.converged {
        Ok((out.record, out.samples))
    } else {
        Err(PseError::NoConvergence { rounds: out.record.rounds, best: Box::new(out.record.to_f64()) })
    }
}
