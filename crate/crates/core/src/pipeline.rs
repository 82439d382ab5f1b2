//! Full run: track, run the endgame at singular points, classify them with
//! the tangent cone, pass folds and seed new branches at bifurcations.

use crate::adaptive::{calibrate, start_point, GenericCalibration, PathPoint, StepState, StopReason, Tracker, TrackerConfig, TrackerError};
use crate::baseline::{track_trial_and_error, BaselineConfig, BaselineError, BaselineStop};
use crate::linalg::{dot, norm2, sub, RankCutoff};
use crate::model::{jacobian_u, registry_entry, ModelError, ParametricSystem, ProblemParams};
use crate::pse::{refine, BifurcationRecord, EndgameSample, PointKind, PseConfig};
use crate::report::{BranchReport, RunReport, TrackerKind};
use crate::tangent_cone::{build_frame, cone_directions, quadratic_model, seed_branches, ConeError, ConeKind, Seed, TangentDirection};
use crate::{lit, Scalar};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Tracker(#[from] TrackerError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("no start point: {0}")]
    NoStart(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig<S> {
    pub problem: String,
    pub p0: S,
    pub tracker: TrackerConfig<S>,
    /// Side branches are seeded only below this depth; straight-through
    /// continuations are always tracked.
    pub branch_depth: usize,
    /// A branch ends at its `fold_limit`-th fold; `None` passes every fold.
    pub fold_limit: Option<usize>,
    pub max_branches: usize,
    /// Stop a branch that comes within `|h|/2` of another branch's points
    /// (away from its own start and from known bifurcations).
    pub visited_check: bool,
    /// Samples collected before the first extrapolation.
    pub min_pse_samples: usize,
    /// Endgame runs that found nothing before a branch gives up.
    pub false_alarm_limit: usize,
}

impl<S: Scalar> RunConfig<S> {
    pub fn new(problem: &str, p0: S, h: S, p_end: S) -> Self {
        Self {
            problem: problem.to_string(),
            p0,
            tracker: TrackerConfig::new(h, p_end),
            branch_depth: 1,
            fold_limit: None,
            max_branches: 32,
            visited_check: true,
            min_pse_samples: 5,
            false_alarm_limit: 10,
        }
    }

    pub fn pse(&self) -> PseConfig<S> {
        let t = &self.tracker;
        PseConfig { winding_max: t.winding_max, k1: t.k1, k2: t.k2, tol: t.pse_tol, rounds: t.pse_rounds, seed: t.rng_seed, window: 8 }
    }
}

/// A branch waiting to be tracked.
struct Task<S> {
    id: usize,
    parent: Option<usize>,
    straight: bool,
    depth: usize,
    u: Vec<S>,
    p: S,
    h: S,
    check_direction: bool,
}

fn stacked<S: Scalar>(u: &[S], p: S) -> Vec<S> {
    let mut w = u.to_vec();
    w.push(p);
    w
}

/// Tail of the path along which `|λ|` strictly decreases, oldest first.
fn tail_samples<S: Scalar>(points: &[crate::adaptive::PathPoint<S>], window: usize) -> Vec<EndgameSample<S>> {
    let mut out: Vec<EndgameSample<S>> = Vec::new();
    for pt in points.iter().rev() {
        let lam = pt.lambda_min.abs();
        if out.last().is_some_and(|s| lam <= s.lambda) || out.len() >= window {
            break;
        }
        out.push(EndgameSample { lambda: lam, u: pt.u.clone(), p: pt.p });
    }
    out.reverse();
    out
}

fn changes_sign<S: Scalar>(base: &StepState<S>, st: &StepState<S>) -> bool {
    let det = base.det_sign != 0 && st.det_sign != 0 && base.det_sign != st.det_sign;
    let lam = base.point.lambda_min * st.point.lambda_min < S::zero();
    det || lam
}

/// Steps from the tracker's current point towards `|λ| = target`, bisecting
/// the step length until `|λ|` lands within 25% of the target. A sign change
/// of `λ` or `det F_u` counts as overshooting. The accepted point is committed.
pub fn sample_toward<S: Scalar>(tr: &mut Tracker<'_, S>, target: S) -> Option<EndgameSample<S>> {
    let lam0 = tr.state.point.lambda_min.abs();
    let hmax = tr.h.abs();
    let dir = tr.h.signum();
    let (lo_band, hi_band) = (target * lit(0.75), target * lit(1.25));
    let mut t = hmax;
    let mut lo = S::zero();
    let mut hi: Option<S> = None;
    let mut best: Option<StepState<S>> = None;
    let here = stacked(&tr.state.point.u, tr.state.point.p);
    let reach = remaining_distance(&tr.points);
    for _ in 0..40 {
        match tr.try_step(dir * t) {
            Ok(st) => {
                let lam = st.point.lambda_min.abs();
                // A step longer than the distance left to the singular point
                // has crossed it and may have landed on another branch.
                let overshoot = reach.is_some_and(|r| norm2(&sub(&stacked(&st.point.u, st.point.p), &here)) > r * lit(0.7));
                if overshoot || changes_sign(&tr.state, &st) || lam < lo_band {
                    hi = Some(t);
                } else if lam > hi_band {
                    if lam < lam0 && best.as_ref().map_or(true, |b| lam < b.point.lambda_min.abs()) {
                        best = Some(st);
                    }
                    lo = t;
                } else {
                    best = Some(st);
                    break;
                }
            }
            Err(_) => hi = Some(t),
        }
        t = match hi {
            Some(h) => {
                if h - lo <= lit::<S>(1e-10) * hmax {
                    break;
                }
                (lo + h) * lit(0.5)
            }
            None if t < hmax * lit(4.0) => t * lit(2.0),
            None => break,
        };
    }
    let st = best?;
    let lam = st.point.lambda_min.abs();
    let in_band = lam >= lo_band && lam <= hi_band;
    if !in_band && lam >= lam0 * lit(0.9) {
        return None;
    }
    let sample = EndgameSample { lambda: lam, u: st.point.u.clone(), p: st.point.p };
    tr.commit(st);
    Some(sample)
}

/// Distance to `λ = 0` along the path, extrapolating `|λ|` linearly in
/// arclength from the last two points. `None` when `|λ|` is not decreasing.
fn remaining_distance<S: Scalar>(points: &[PathPoint<S>]) -> Option<S> {
    let [.., a, b] = points else { return None };
    let (la, lb) = (a.lambda_min.abs(), b.lambda_min.abs());
    if !(lb < la) {
        return None;
    }
    let ds = norm2(&sub(&stacked(&b.u, b.p), &stacked(&a.u, a.p)));
    Some(lb * ds / (la - lb))
}

/// Collects samples and refines. `None` means the endgame could not get
/// closer to a singular point.
fn endgame<S: Scalar>(tr: &mut Tracker<'_, S>, cfg: &RunConfig<S>, forced: bool) -> Option<BifurcationRecord<S>> {
    let pse = cfg.pse();
    let mut samples = tail_samples(&tr.points, pse.window);
    while samples.len() < cfg.min_pse_samples {
        let target = samples.last().map(|s| s.lambda).unwrap_or(tr.state.point.lambda_min.abs()) * lit(0.5);
        match sample_toward(tr, target) {
            Some(s) => samples.push(s),
            None => break,
        }
    }
    if samples.len() < 3 {
        return None;
    }
    let sys = tr.sys;
    let out = refine(sys, samples, &mut |target| sample_toward(tr, target), &pse).ok()?;
    if out.generated == 0 && !out.record.converged && !forced {
        return None;
    }
    // The extrapolate must lie near the samples it came from.
    let first = out.samples.first()?;
    let last = out.samples.last()?;
    let w_last = stacked(&last.u, last.p);
    let span = norm2(&sub(&stacked(&first.u, first.p), &w_last));
    let dist = norm2(&sub(&stacked(&out.record.u_b, out.record.p_b), &w_last));
    if !(dist <= (span + tr.h.abs()) * lit(4.0)) {
        return None;
    }
    Some(out.record)
}

fn cutoff<S: Scalar>(cfg: &RunConfig<S>, calib: &GenericCalibration<S>) -> RankCutoff<S> {
    RankCutoff { rel: cfg.tracker.rank_cutoff, reference: Some(calib.lambda_tilde) }
}

fn to_scalar<S: Scalar>(v: &[f64]) -> Vec<S> {
    v.iter().map(|&x| lit(x)).collect()
}

fn direction_from<S: Scalar>(w: &[S]) -> TangentDirection<S> {
    let n = w.len() - 1;
    TangentDirection { a: [S::one(), S::zero()], delta_u: w[..n].to_vec(), delta_p: w[n] }
}

/// `h` for a branch leaving along `d`: the sign of its `Δp`, magnitude `|h|`.
fn branch_h<S: Scalar>(delta_p: S, h: S) -> S {
    if delta_p == S::zero() {
        h
    } else {
        h.abs() * delta_p.signum()
    }
}

struct Ctx<'a, S: Scalar> {
    sys: &'a dyn ParametricSystem<S>,
    cfg: &'a RunConfig<S>,
    calib: GenericCalibration<S>,
    bounds: (S, S),
    report: RunReport<S>,
    queue: VecDeque<Task<S>>,
    next_id: usize,
}

impl<'a, S: Scalar> Ctx<'a, S> {
    fn push_task(&mut self, parent: Option<usize>, straight: bool, depth: usize, seed: &Seed<S>, h: S) {
        if self.next_id >= self.cfg.max_branches {
            return;
        }
        let id = self.next_id;
        self.next_id += 1;
        self.queue.push_back(Task { id, parent, straight, depth, u: seed.u.clone(), p: seed.p, h, check_direction: false });
    }

    fn tracker(&self, u: Vec<S>, p: S, h: S, check_direction: bool) -> Result<Tracker<'a, S>, TrackerError> {
        let mut tc = self.cfg.tracker.clone();
        tc.h = h;
        let state = StepState::at(self.sys, u, p, 0, &self.calib, tc.eigen_side, None, None)?;
        let mut tr = Tracker::from_state(self.sys, state, self.calib.clone(), tc);
        tr.check_direction = check_direction;
        tr.bounds = self.bounds;
        if self.cfg.visited_check {
            let radius = h.abs() * lit(0.5);
            let exclusion = h.abs() * lit(2.0);
            let origin = stacked(&tr.state.point.u, tr.state.point.p);
            // Branches meet at bifurcations, so points near one do not count as visited.
            let junctions: Vec<Vec<S>> = self.report.bifurcations.iter().map(|r| stacked(&r.u_b, r.p_b)).collect();
            let others: Vec<Vec<S>> = self
                .report
                .branches
                .iter()
                .flat_map(|b| b.points.iter().map(|q| stacked(&q.u, q.p)))
                .filter(|q| norm2(&sub(q, &origin)) > exclusion)
                .filter(|q| junctions.iter().all(|j| norm2(&sub(q, j)) > exclusion))
                .collect();
            if !others.is_empty() {
                tr.guard = Some(Box::new(move |pt| {
                    let w = stacked(&pt.u, pt.p);
                    norm2(&sub(&w, &origin)) > exclusion && others.iter().any(|q| norm2(&sub(q, &w)) < radius)
                }));
            }
        }
        Ok(tr)
    }

    /// Tracks one branch to its end and queues any branches it spawns.
    fn run_branch(&mut self, task: Task<S>) -> Result<(), PipelineError> {
        let t0 = Instant::now();
        let mut branch = BranchReport::new(task.id, task.parent, task.straight, task.depth);
        let mut tr = self.tracker(task.u, task.p, task.h, task.check_direction)?;
        let mut false_alarms = 0;
        let mut inflation = 0;
        let stop = loop {
            let stop = tr.run();
            let crossing = match stop {
                StopReason::PseZone => None,
                StopReason::SignChange(st) => Some(*st),
                other => break other.label().to_string(),
            };
            let forced = crossing.is_some();
            let Some(mut rec) = endgame(&mut tr, self.cfg, forced) else {
                false_alarms += 1;
                if false_alarms > self.cfg.false_alarm_limit {
                    break "false_alarm_limit".to_string();
                }
                if let Some(st) = crossing {
                    tr.commit(st);
                }
                continue;
            };
            rec.branch = task.id;
            let w_last = stacked(&tr.state.point.u, tr.state.point.p);
            let w_b = stacked(&rec.u_b, rec.p_b);
            match build_frame(self.sys, &rec.u_b, rec.p_b, cutoff(self.cfg, &self.calib)) {
                Err(ConeError::NotABifurcation { tangent }) => {
                    rec.kind = PointKind::Fold;
                    branch.folds += 1;
                    self.report.bifurcations.push(rec.clone());
                    if self.cfg.fold_limit.is_some_and(|l| branch.folds >= l) {
                        break "fold".to_string();
                    }
                    // Continue past the fold along the forward tangent with h reversed.
                    let mut t: Vec<S> = to_scalar(&tangent);
                    let ahead = sub(&w_b, &w_last);
                    let reference = if norm2(&ahead) > lit::<S>(1e-12) {
                        ahead
                    } else {
                        let pts = &tr.points;
                        let k = pts.len();
                        if k >= 2 {
                            sub(&w_last, &stacked(&pts[k - 2].u, pts[k - 2].p))
                        } else {
                            vec![S::one(); t.len()]
                        }
                    };
                    if dot(&t, &reference) < S::zero() {
                        t.iter_mut().for_each(|x| *x = -*x);
                    }
                    let h = tr.h;
                    let seeds = seed_branches(
                        self.sys,
                        &rec.u_b,
                        rec.p_b,
                        &[direction_from(&t)],
                        h.abs(),
                        None,
                        &self.cfg.tracker.inflation(),
                    )
                    .unwrap_or_default();
                    let Some(seed) = seeds.into_iter().next() else { break "fold_seed_failed".to_string() };
                    inflation += tr.stats.inflation_steps;
                    branch.extend(std::mem::take(&mut tr.points));
                    let guard = tr.guard.take();
                    let mut next = self.tracker(seed.u, seed.p, -h, false)?;
                    next.guard = guard;
                    tr = next;
                }
                Err(ConeError::UnsupportedCorank(_)) => {
                    self.report.bifurcations.push(rec);
                    break "unsupported_corank".to_string();
                }
                Err(ConeError::Model(e)) => return Err(e.into()),
                Err(_) => break "cone_failed".to_string(),
                Ok(frame) => {
                    let qm = quadratic_model(self.sys, &frame, &rec.u_b, rec.p_b)?;
                    let (kind, dirs) = cone_directions(&qm.h, &frame);
                    if kind == ConeKind::Complex {
                        rec.kind = PointKind::ComplexCone;
                        self.report.bifurcations.push(rec);
                        break "complex_cone".to_string();
                    }
                    rec.kind = PointKind::Bifurcation;
                    rec.directions = dirs.clone();
                    let incoming = sub(&w_last, &w_b);
                    let seeds = seed_branches(
                        self.sys,
                        &rec.u_b,
                        rec.p_b,
                        &dirs,
                        tr.h.abs(),
                        Some(&incoming),
                        &self.cfg.tracker.inflation(),
                    )
                    .unwrap_or_default();
                    // Straight-through: the seed pointing most directly away from the incoming path.
                    let ni = norm2(&incoming).max(S::min_positive_value());
                    let cosines: Vec<S> = seeds
                        .iter()
                        .map(|s| {
                            let d = sub(&s.stacked(), &w_b);
                            dot(&d, &incoming) / (norm2(&d) * ni)
                        })
                        .collect();
                    let straight = (0..seeds.len())
                        .min_by(|&a, &b| cosines[a].partial_cmp(&cosines[b]).unwrap_or(std::cmp::Ordering::Equal));
                    for (k, seed) in seeds.iter().enumerate() {
                        let is_straight = Some(k) == straight;
                        if !is_straight && task.depth >= self.cfg.branch_depth {
                            continue;
                        }
                        let depth = if is_straight { task.depth } else { task.depth + 1 };
                        let h = branch_h(dirs[seed.direction].delta_p, tr.h);
                        self.push_task(Some(task.id), is_straight, depth, seed, h);
                    }
                    self.report.bifurcations.push(rec);
                    break "bifurcation".to_string();
                }
            }
        };
        inflation += tr.stats.inflation_steps;
        branch.extend(std::mem::take(&mut tr.points));
        branch.stop = stop;
        branch.inflation_steps = inflation;
        branch.wall_time_s = t0.elapsed().as_secs_f64();
        self.report.branches.push(branch);
        Ok(())
    }

    /// The start itself is singular: record it and seed every direction
    /// whose parameter component moves the way `h` does.
    fn singular_start(&mut self, u0: &[S], p0: S) -> Result<bool, PipelineError> {
        let h = self.cfg.tracker.h;
        let frame = match build_frame(self.sys, u0, p0, cutoff(self.cfg, &self.calib)) {
            Ok(f) => f,
            Err(ConeError::Model(e)) => return Err(e.into()),
            Err(_) => return Ok(false),
        };
        let qm = quadratic_model(self.sys, &frame, u0, p0)?;
        let (kind, dirs) = cone_directions(&qm.h, &frame);
        if kind == ConeKind::Complex {
            return Ok(false);
        }
        let keep: Vec<TangentDirection<S>> = dirs.iter().filter(|d| d.delta_p * h > S::zero()).cloned().collect();
        let seeds = seed_branches(self.sys, u0, p0, &keep, h.abs(), None, &self.cfg.tracker.inflation()).unwrap_or_default();
        if seeds.is_empty() {
            return Ok(false);
        }
        let residual = crate::model::residual_norm(self.sys, u0, p0)?;
        self.report.bifurcations.push(BifurcationRecord {
            u_b: u0.to_vec(),
            p_b: p0,
            c1: 1,
            c2: 1,
            exponent_u: S::one(),
            exponent_p: S::one(),
            holdout_error: S::zero(),
            samples_used: 0,
            rounds: 0,
            converged: true,
            residual,
            kind: PointKind::Bifurcation,
            directions: dirs,
            branch: 0,
        });
        for seed in &seeds {
            self.push_task(None, false, 1, seed, h);
        }
        Ok(true)
    }
}

/// Adaptive tracking with endgame and branch switching from `(u0, p0)`.
/// Numerical failures after calibration are recorded in `report.failure`.
pub fn run_adaptive<S: Scalar>(sys: &dyn ParametricSystem<S>, u0: &[S], cfg: &RunConfig<S>) -> Result<RunReport<S>, PipelineError> {
    let t0 = Instant::now();
    let tc = &cfg.tracker;
    tc.validate()?;
    let start = start_point(sys, u0.to_vec(), cfg.p0, tc.eigen_side)?;
    let calib = calibrate(sys, &start, tc)?;
    let mut report = RunReport::new(TrackerKind::Adaptive, cfg.clone());
    report.calibration = Some(calib.clone());
    let bounds = (cfg.p0.min(tc.p_end), cfg.p0.max(tc.p_end));
    let mut ctx = Ctx { sys, cfg, calib, bounds, report, queue: VecDeque::new(), next_id: 0 };
    let jscale = jacobian_u(sys, u0, cfg.p0)?.norm_inf().max(S::one());
    let singular = start.lambda_min.abs() <= tc.ill_cond_lambda * jscale && ctx.singular_start(u0, cfg.p0)?;
    if !singular {
        ctx.next_id = 1;
        ctx.queue.push_back(Task { id: 0, parent: None, straight: false, depth: 0, u: u0.to_vec(), p: cfg.p0, h: tc.h, check_direction: true });
    }
    while let Some(task) = ctx.queue.pop_front() {
        if let Err(e) = ctx.run_branch(task) {
            ctx.report.failure = Some(e.to_string());
            break;
        }
    }
    ctx.report.branches.sort_by_key(|b| b.id);
    let mut report = ctx.report;
    report.finish(t0.elapsed().as_secs_f64());
    Ok(report)
}

/// Trial-and-error tracking of one branch. A stagnation point is reported
/// as the baseline's bifurcation estimate.
pub fn run_baseline<S: Scalar>(sys: &dyn ParametricSystem<S>, u0: &[S], cfg: &RunConfig<S>) -> Result<RunReport<S>, PipelineError> {
    let t0 = Instant::now();
    let tc = &cfg.tracker;
    let mut bc = BaselineConfig::new(tc.h, tc.p_end);
    bc.tol = tc.newton_tol;
    bc.max_steps = tc.max_steps;
    let mut report = RunReport::new(TrackerKind::Traditional, cfg.clone());
    let out = track_trial_and_error(sys, u0, cfg.p0, &bc)?;
    let mut branch = BranchReport::new(0, None, false, 0);
    branch.extend(out.points);
    branch.stop = match out.stop {
        BaselineStop::ReachedEnd => "reached_end",
        BaselineStop::Stagnated => "stagnated",
        BaselineStop::MaxSteps => "max_steps",
    }
    .to_string();
    branch.wall_time_s = t0.elapsed().as_secs_f64();
    if out.stop == BaselineStop::Stagnated {
        let last = branch.points.last().expect("start point is always present");
        report.bifurcations.push(BifurcationRecord {
            u_b: last.u.clone(),
            p_b: last.p,
            c1: 0,
            c2: 0,
            exponent_u: S::zero(),
            exponent_p: S::zero(),
            holdout_error: S::zero(),
            samples_used: 0,
            rounds: 0,
            converged: false,
            residual: last.residual,
            kind: PointKind::Unclassified,
            directions: Vec::new(),
            branch: 0,
        });
    }
    report.branches.push(branch);
    report.finish(t0.elapsed().as_secs_f64());
    Ok(report)
}

/// Registered start for `problem`: the stored point for the algebraic
/// examples, solution `solution` (1-based, largest max-norm first) of the
/// steady problem at `p0` for `pde1d`, the resident state for `competition`.
pub fn default_start(problem: &str, params: &ProblemParams, p0: f64, solution: usize) -> Result<Vec<f64>, PipelineError> {
    let entry = registry_entry(problem)?;
    if let Some(u) = entry.u0 {
        return Ok(u);
    }
    match problem {
        "pde1d" => {
            let sys = crate::pde::build_pde1d::<f64>(params.grid_n.unwrap_or(crate::pde::PDE1D_DEFAULT_N))?;
            let set = crate::pde::pde1d_solutions(&sys, p0)?;
            let k = solution.max(1);
            set.solutions.get(k - 1).cloned().ok_or_else(|| {
                PipelineError::NoStart(format!("solution {k} requested, {} found at p = {p0}", set.solutions.len()))
            })
        }
        "competition" => {
            let n = params.grid_n.unwrap_or(crate::pde::COMPETITION_DEFAULT_N);
            Ok(crate::pde::initial_resident(p0, params.d.unwrap_or(1.0), n)?.to_vector())
        }
        other => Err(PipelineError::NoStart(format!("no registered start for `{other}`"))),
    }
}

/// Where a baseline run should start to be comparable with `report`: the
/// adaptive start, or the first point of branch 0 when the start itself was
/// singular and the adaptive run had to switch onto a branch first.
pub fn baseline_start<S: Scalar>(report: &RunReport<S>, u0: &[S], p0: S) -> (Vec<S>, S) {
    let singular_start = report.bifurcations.first().is_some_and(|r| r.samples_used == 0 && r.p_b == p0 && r.u_b == u0);
    match report.branches.first().and_then(|b| b.points.first()) {
        Some(pt) if singular_start => (pt.u.clone(), pt.p),
        _ => (u0.to_vec(), p0),
    }
}
