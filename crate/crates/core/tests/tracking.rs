use approx::assert_abs_diff_eq;
use bifurcation_core::adaptive::{
    augmented_jacobian, augmented_residual, calibrate, eigen_direction, newton_step_augmented, start_point, track,
    EigenSide, GenericCalibration, PathPoint, StepState, StopReason, Tracker, TrackerConfig, TrackerError,
};
use bifurcation_core::baseline::{
    euler_predict, newton_correct, track_trial_and_error, BaselineConfig, BaselineError, BaselineStop,
};
use bifurcation_core::linalg::{dot, norm2, singular_values, DenseMatrix, Lu};
use bifurcation_core::model::{builtin, evaluate, jacobian_p, jacobian_u, FnSystem, ParametricSystem, ProblemParams};
use bifurcation_core::pipeline::{default_start, run_adaptive, RunConfig};
use proptest::prelude::*;

fn sys(name: &str) -> Box<dyn ParametricSystem<f64>> {
    builtin(name, &ProblemParams::default()).unwrap()
}

fn calib(lambda_tilde: f64, norm: f64) -> GenericCalibration<f64> {
    GenericCalibration { p_tilde: 0.0, u_tilde: vec![], lambda_tilde, newton_dir_norm: norm, draws: 1 }
}

fn manual_state(u: Vec<f64>, p: f64, v: Vec<f64>, s: f64, g: f64) -> StepState<f64> {
    StepState { point: PathPoint { u, p, lambda_min: 0.0, residual: 0.0, index: 0 }, v, s, g, z: None, det_sign: 1 }
}

/// `F(u, p) = A u − p b`, linear in both arguments.
fn linear_system(a: DenseMatrix<f64>, b: Vec<f64>) -> FnSystem<f64> {
    let n = b.len();
    let (a2, b2) = (a.clone(), b.clone());
    FnSystem::new("linear", n, move |u, p, out| {
        let au = a.matvec(u);
        for i in 0..n {
            out[i] = au[i] - p * b[i];
        }
    })
    .with_jacobians(move |_, _| a2.clone(), move |_, _| b2.iter().map(|x| -x).collect())
}

// ---- baseline ----

#[test]
fn euler_zero_step() {
    let s = sys("ex11");
    assert_eq!(euler_predict(s.as_ref(), &[-1.0, 1.0], 1.0, 0.0).unwrap(), vec![-1.0, 1.0]);
}

#[test]
fn euler_matches_hand_inverse() {
    // F_u = [[−2, 0], [−2, −4]], F_p = (−1, 1): F_u⁻¹F_p = (1/2, −1/2) by hand,
    // so Δu = −F_u⁻¹F_p·dp = (0.05, −0.05) for dp = −0.1. This is also the
    // tangent of x = −√p, y = √p at p = 1.
    let s = sys("ex11");
    let u = euler_predict(s.as_ref(), &[-1.0, 1.0], 1.0, -0.1).unwrap();
    assert_abs_diff_eq!(u[0] + 1.0, 0.05, epsilon = 1e-15);
    assert_abs_diff_eq!(u[1] - 1.0, -0.05, epsilon = 1e-15);
}

#[test]
fn corrector_lands_on_exact_branch() {
    let s = sys("ex11");
    let pred = euler_predict(s.as_ref(), &[-1.0, 1.0], 1.0, -0.19).unwrap();
    let (u, _) = newton_correct(s.as_ref(), &pred, 0.81, 1e-12, 10).unwrap();
    assert_abs_diff_eq!(u[0], -0.9, epsilon = 1e-10);
    assert_abs_diff_eq!(u[1], 0.9, epsilon = 1e-10);
    let (same, it) = newton_correct(s.as_ref(), &u, 0.81, 1e-10, 10).unwrap();
    assert_eq!(it, 0);
    assert_eq!(same, u);
}

#[test]
fn corrector_fails_at_the_fold() {
    let s = sys("ex11");
    let r = newton_correct(s.as_ref(), &[-1e-2, 1.3e-2], 0.0, 1e-12, 10);
    assert!(matches!(r, Err(BaselineError::NoConvergence { .. })));
    let r = newton_correct(s.as_ref(), &[0.0, 1e-4], 1e-8, 1e-12, 10);
    assert!(matches!(r, Err(BaselineError::SingularMatrix(_))));
}

#[test]
fn linear_problem_step_count() {
    let a = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![0.0, 3.0]]);
    let s = linear_system(a, vec![1.0, 1.0]);
    let out = track_trial_and_error(&s, &[0.0, 0.0], 0.0, &BaselineConfig::new(0.3, 1.0)).unwrap();
    assert_eq!(out.stop, BaselineStop::ReachedEnd);
    assert_eq!(out.steps, (1.0f64 / 0.3).ceil() as usize);
    assert_eq!(out.attempts, out.steps);
    // Euler is exact on a linear problem, so the corrector has nothing to do.
    let pred = euler_predict(&s, &[0.0, 0.0], 0.0, 0.3).unwrap();
    assert_eq!(newton_correct(&s, &pred, 0.3, 1e-12, 10).unwrap().1, 0);
}

#[test]
fn baseline_ex11_stagnates() {
    let s = sys("ex11");
    let out = track_trial_and_error(s.as_ref(), &[-1.0, 1.0], 1.0, &BaselineConfig::new(-0.1, -0.5)).unwrap();
    assert_eq!(out.stop, BaselineStop::Stagnated);
    assert!((13..=25).contains(&out.steps), "steps {}", out.steps);
    let last = out.points.last().unwrap();
    assert!(last.p.abs() < 1e-5 && last.u[0].abs() < 1e-2);
    for pt in &out.points {
        assert!(pt.residual <= 1e-10);
    }
    // Accepted parameter steps are |h0| / 2^k.
    for w in out.points.windows(2) {
        let k = (0.1 / (w[1].p - w[0].p).abs()).log2();
        assert!(k >= -1e-9 && (k - k.round()).abs() < 1e-6, "step {}", w[1].p - w[0].p);
    }
}

#[test]
fn baseline_and_adaptive_share_the_path() {
    // Both trackers stay on x = −√p, y = √p for p ∈ [0.5, 1].
    let s = sys("ex11");
    let base = track_trial_and_error(s.as_ref(), &[-1.0, 1.0], 1.0, &BaselineConfig::new(-0.1, 0.5)).unwrap();
    let start = start_point(s.as_ref(), vec![-1.0, 1.0], 1.0, EigenSide::Right).unwrap();
    let ad = track(s.as_ref(), start, &TrackerConfig::new(-0.1, 0.5)).unwrap();
    let off = |pt: &PathPoint<f64>| ((pt.u[0] + pt.p.sqrt()).abs()).max((pt.u[1] - pt.p.sqrt()).abs());
    for pt in base.points.iter().chain(&ad.points).filter(|pt| pt.p >= 0.5) {
        assert!(off(pt) <= 1e-4);
    }
}

// ---- adaptive ----

#[test]
fn augmented_residual_limits() {
    let s = sys("ex11");
    let u0 = vec![-1.0, 1.0];
    let v = vec![0.6, 0.8];
    let u = vec![-0.9, 1.2];
    let st = manual_state(u0.clone(), 1.0, v.clone(), 1.0, 0.7);
    let r = augmented_residual(s.as_ref(), &st, &u, 0.8, -0.2).unwrap();
    assert_abs_diff_eq!(r[2], (0.8 - 1.0) + 0.2, epsilon = 1e-15);
    let st0 = manual_state(u0.clone(), 1.0, v.clone(), 0.0, 0.7);
    let r0 = augmented_residual(s.as_ref(), &st0, &u, 0.8, -0.2).unwrap();
    assert_abs_diff_eq!(r0[2], 0.7 * (0.6 * 0.1 + 0.8 * 0.2) + 0.2, epsilon = 1e-15);
    let at = augmented_residual(s.as_ref(), &st0, &u0, 1.0, -0.2).unwrap();
    assert_eq!(at, vec![0.0, 0.0, 0.2]);
    assert!(matches!(augmented_residual(s.as_ref(), &st0, &[1.0], 1.0, 0.1), Err(TrackerError::Model(_))));
}

#[test]
fn augmented_jacobian_rows() {
    let s = sys("ex11");
    let st = manual_state(vec![-1.0, 1.0], 1.0, vec![0.6, 0.8], 1.0, 0.7);
    let a = augmented_jacobian(s.as_ref(), &st, &[-1.0, 1.0], 1.0).unwrap();
    assert_eq!(a.row(2), &[0.0, 0.0, 1.0]);
    assert_eq!(a.row(0), &[-2.0, 0.0, -1.0]);
}

#[test]
fn augmented_determinant_by_blocks() {
    // det [[J, b], [w vᵀ, s]] = det J · (s − w vᵀ J⁻¹ b), w = g(1 − s).
    let a = DenseMatrix::from_rows(&[vec![2.0, -1.0, 0.5], vec![0.3, 1.5, -0.7], vec![-0.4, 0.2, 1.1]]);
    let b = vec![0.9, -0.3, 0.4];
    let s = linear_system(a.clone(), b.clone());
    let (sv, g) = (0.35, -0.8);
    let v = vec![0.48, -0.6, 0.64];
    let st = manual_state(vec![0.0; 3], 0.0, v.clone(), sv, g);
    let aug = augmented_jacobian(&s, &st, &[0.0; 3], 0.0).unwrap();
    let det_j = Lu::factor(&a).unwrap().determinant();
    let fp: Vec<f64> = b.iter().map(|x| -x).collect();
    let z = Lu::factor(&a).unwrap().solve(&fp);
    let want = det_j * (sv - g * (1.0 - sv) * dot(&v, &z));
    assert_abs_diff_eq!(Lu::factor(&aug).unwrap().determinant(), want, epsilon = 1e-12);
}

fn ex11_calibrated() -> (Box<dyn ParametricSystem<f64>>, PathPoint<f64>, GenericCalibration<f64>, TrackerConfig<f64>) {
    let s = sys("ex11");
    let cfg = TrackerConfig::new(-0.2, -0.5);
    let start = start_point(s.as_ref(), vec![-1.0, 1.0], 1.0, EigenSide::Right).unwrap();
    let cal = calibrate(s.as_ref(), &start, &cfg).unwrap();
    (s, start, cal, cfg)
}

#[test]
fn calibration_lands_on_the_branch() {
    let (s, _, cal, _) = ex11_calibrated();
    let p = cal.p_tilde;
    assert!(p > -0.5 && p < 1.0);
    assert!(p > 0.0, "p̃ = {p} lies past the fold");
    assert_abs_diff_eq!(cal.u_tilde[0], -p.sqrt(), epsilon = 1e-9);
    assert_abs_diff_eq!(cal.u_tilde[1], p.sqrt(), epsilon = 1e-9);
    assert!(norm2(&evaluate(s.as_ref(), &cal.u_tilde, p).unwrap()) <= 1e-8);
    assert!(cal.lambda_tilde > 0.0 && cal.newton_dir_norm > 0.0);
}

#[test]
fn calibration_needs_an_interval() {
    let s = sys("ex11");
    let start = start_point(s.as_ref(), vec![-1.0, 1.0], 1.0, EigenSide::Right).unwrap();
    let r = calibrate(s.as_ref(), &start, &TrackerConfig::new(-0.2, 1.0));
    assert!(matches!(r, Err(TrackerError::CalibrationFailed(_))));
}

#[test]
fn generic_step_moves_p_by_h() {
    // At the calibration point itself s = 1, so the parameter step is exactly h.
    let (s, _, cal, cfg) = ex11_calibrated();
    let start = start_point(s.as_ref(), cal.u_tilde.clone(), cal.p_tilde, EigenSide::Right).unwrap();
    let mut tr = Tracker::new(s.as_ref(), start, cal.clone(), cfg.clone()).unwrap();
    assert_abs_diff_eq!(tr.state.s, 1.0, epsilon = 1e-12);
    let next = tr.try_step(-0.05).unwrap();
    assert!((next.point.p - (cal.p_tilde - 0.05)).abs() <= 10.0 * cfg.newton_tol);
}

#[test]
fn newton_step_sign_follows_h() {
    let (s, start, cal, cfg) = ex11_calibrated();
    let st = StepState::at(s.as_ref(), start.u.clone(), start.p, 0, &cal, EigenSide::Right, None, None).unwrap();
    let down = newton_step_augmented(s.as_ref(), &st, -0.2, &cfg).unwrap();
    let up = newton_step_augmented(s.as_ref(), &st, 0.2, &cfg).unwrap();
    assert!(down.p < 1.0 && up.p > 1.0);
    assert!(down.residual <= cfg.newton_tol);
}

#[test]
fn g_sign_and_scale() {
    let (s, start, cal, _) = ex11_calibrated();
    let st = StepState::at(s.as_ref(), start.u.clone(), start.p, 0, &cal, EigenSide::Right, None, None).unwrap();
    let j = jacobian_u(s.as_ref(), &start.u, start.p).unwrap();
    let z = Lu::factor(&j).unwrap().solve(&jacobian_p(s.as_ref(), &start.u, start.p).unwrap());
    assert_abs_diff_eq!(st.g.abs(), 1.0 / cal.newton_dir_norm, epsilon = 1e-15);
    assert_eq!(st.g.signum(), (-dot(&st.v, &z)).signum());
    assert_abs_diff_eq!(st.s, (start.lambda_min.abs() / cal.lambda_tilde).min(1.0), epsilon = 1e-15);
}

#[test]
fn ex11_reaches_the_zone() {
    let (s, start, _, cfg) = ex11_calibrated();
    let out = track(s.as_ref(), start.clone(), &cfg).unwrap();
    assert_eq!(out.stop, StopReason::PseZone);
    assert!(out.points.len() - 1 <= 12, "{} steps", out.points.len() - 1);
    for pt in &out.points {
        assert!(pt.residual <= cfg.newton_tol);
    }
    // Near the fold the step goes mostly along v rather than in p.
    let (a, b) = (&out.points[out.points.len() - 2], out.points.last().unwrap());
    let (_, v) = eigen_direction(&jacobian_u(s.as_ref(), &a.u, a.p).unwrap(), EigenSide::Right).unwrap();
    let du: Vec<f64> = b.u.iter().zip(&a.u).map(|(x, y)| x - y).collect();
    assert!(dot(&v, &du).abs() > (b.p - a.p).abs());
    // Same configuration and seed, same path.
    let again = track(s.as_ref(), start, &cfg).unwrap();
    assert_eq!(out.points, again.points);
}

#[test]
fn flipped_h_goes_the_other_way() {
    let s = sys("ex11");
    let start = start_point(s.as_ref(), vec![-1.0, 1.0], 1.0, EigenSide::Right).unwrap();
    let out = track(s.as_ref(), start, &TrackerConfig::new(0.2, 2.0)).unwrap();
    assert_eq!(out.stop, StopReason::ReachedEnd);
    assert!(out.points.windows(2).all(|w| w[1].p > w[0].p));
}

#[test]
fn wrong_side_end_is_immediate() {
    let (s, start, cal, _) = ex11_calibrated();
    let mut tr = Tracker::new(s.as_ref(), start, cal, TrackerConfig::new(0.2, -0.5)).unwrap();
    assert_eq!(tr.run(), StopReason::ReachedEnd);
    assert_eq!(tr.points.len(), 1);
}

#[test]
fn ex22_branches_reach_the_fold() {
    let s = sys("ex22");
    let mut cfg = RunConfig::new("ex22", 0.75f64.sqrt(), 0.1, 1.0);
    cfg.fold_limit = Some(1);
    let r = run_adaptive(s.as_ref(), &[0.5], &cfg).unwrap();
    assert!(r.failure.is_none());
    assert!(!r.branches.is_empty());
    for b in &r.branches {
        assert!(b.steps <= 15, "branch {} took {} steps", b.id, b.steps);
        let top = b.points.iter().map(|p| p.p).fold(f64::MIN, f64::max);
        assert!(top >= 1.0 - 1e-6, "branch {} peaks at p = {top}", b.id);
    }
}

/// Runs a plain tracker and checks the step direction on every accepted step.
fn check_remark2(s: &dyn ParametricSystem<f64>, u0: Vec<f64>, p0: f64, h: f64, p_end: f64, tol: f64) -> usize {
    let mut cfg = TrackerConfig::new(h, p_end);
    cfg.newton_tol = tol;
    cfg.max_steps = 60;
    let start = start_point(s, u0, p0, EigenSide::Right).unwrap();
    let out = track(s, start, &cfg).unwrap();
    let mut checked = 0;
    for w in out.points.windows(2) {
        let sv = (w[0].lambda_min.abs() / out.calibration.lambda_tilde).min(1.0);
        if sv > 0.0 {
            assert_eq!((w[1].p - w[0].p).signum(), h.signum(), "{}: step {} -> {}", s.name(), w[0].p, w[1].p);
            checked += 1;
        }
    }
    checked
}

#[test]
fn step_sign_matches_h_on_every_problem() {
    let mut total = 0;
    total += check_remark2(sys("ex11").as_ref(), vec![-1.0, 1.0], 1.0, -0.2, -0.5, 1e-10);
    total += check_remark2(sys("ex11").as_ref(), vec![-1.0, 1.0], 1.0, -0.05, -0.5, 1e-10);
    total += check_remark2(sys("ilex").as_ref(), vec![-1.0, 2.0], 1.0, -0.1, -0.5, 1e-10);
    total += check_remark2(sys("ex21").as_ref(), vec![1.0], 1.0, -0.1, -1.0, 1e-10);
    total += check_remark2(sys("ex22").as_ref(), vec![1.0], 0.0, 0.1, 1.0, 1e-10);
    total += check_remark2(sys("ex23").as_ref(), vec![1.0], 1.0, -0.05, -0.03, 1e-10);
    let pp = ProblemParams { grid_n: Some(60), d: None };
    let pde = builtin::<f64>("pde1d", &pp).unwrap();
    let u0 = default_start("pde1d", &pp, 18.0, 2).unwrap();
    total += check_remark2(pde.as_ref(), u0, 18.0, -0.4, 0.0, 1e-8);
    let pc = ProblemParams { grid_n: Some(40), d: None };
    let comp = builtin::<f64>("competition", &pc).unwrap();
    let z0 = default_start("competition", &pc, 0.01, 1).unwrap();
    total += check_remark2(comp.as_ref(), z0, 0.01, 0.01, 1.0, 1e-8);
    assert!(total > 50, "only {total} steps checked");
}

/// Random system `F(u, p) = M u + p b + c·(u_1², …)` with `M` nonsingular.
fn random_system(n: usize, data: &[f64], shift: f64) -> FnSystem<f64> {
    let m = DenseMatrix::from_fn(n, n, |i, j| data[i * n + j]).add_diag(shift);
    let b: Vec<f64> = (0..n).map(|i| data[n * n + i]).collect();
    let (m2, b2) = (m.clone(), b.clone());
    FnSystem::new("random", n, move |u, p, out| {
        let mu = m.matvec(u);
        for i in 0..n {
            out[i] = mu[i] + p * b[i] + 0.1 * u[i] * u[i];
        }
    })
    .with_jacobians(
        move |u, _| {
            let mut j = m2.clone();
            for i in 0..u.len() {
                j[(i, i)] += 0.2 * u[i];
            }
            j
        },
        move |_, _| b2.clone(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn augmented_jacobian_keeps_rank(
        n in 2usize..7,
        data in prop::collection::vec(-1.0f64..1.0, 56),
        u in prop::collection::vec(-0.5f64..0.5, 7),
        shift in 0.5f64..3.0,
        lambda_tilde in 0.05f64..5.0,
        norm in 0.1f64..10.0,
    ) {
        let s = random_system(n, &data, shift);
        let u = u[..n].to_vec();
        let j = jacobian_u(&s, &u, 0.3).unwrap();
        prop_assume!(Lu::factor(&j).is_ok());
        let st = StepState::at(&s, u.clone(), 0.3, 0, &calib(lambda_tilde, norm), EigenSide::Right, None, None).unwrap();
        prop_assume!(st.s > 0.0);
        let a = augmented_jacobian(&s, &st, &u, 0.3).unwrap();
        let sv = singular_values(&a).unwrap();
        prop_assert!(sv[n] > 1e-10 * sv[0], "σ = {:?}", sv);
    }
}

// ---- inflation ----

use bifurcation_core::inflation::{assemble_inflated, inflated_newton, solve_inflated, InflationConfig, InflationUpdate};
use bifurcation_core::linalg::{solve_dense, symmetric_eigen};

#[test]
fn zero_jacobian_gives_zero_update() {
    let j = DenseMatrix::<f64>::zeros(3, 3);
    let inf = assemble_inflated(&j, &[1.0, -2.0, 0.5]).unwrap();
    assert!(inf.matrix.max_abs() == 0.0 && inf.rhs.iter().all(|&x| x == 0.0));
    let up = solve_inflated(&inf, 1e-12, 10).unwrap();
    assert!(up.delta_u.iter().all(|&x| x == 0.0));
}

#[test]
fn zero_residual_gives_zero_update() {
    let j = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]);
    let up = solve_inflated(&assemble_inflated(&j, &[0.0, 0.0]).unwrap(), 1e-14, 100).unwrap();
    assert_eq!(up.delta_u, vec![0.0, 0.0]);
}

#[test]
fn exact_solution_is_a_fixed_point() {
    let s = sys("ex11");
    let out = inflated_newton(s.as_ref(), &[-0.9, 0.9], 0.81, &InflationConfig::default()).unwrap();
    assert!(out.iterations <= 1);
    assert_abs_diff_eq!(out.u[0], -0.9, epsilon = 1e-12);
}

#[test]
fn inflated_matches_newton_off_the_fold() {
    let s = sys("ex11");
    let (u0, p) = (vec![1.3e-4, 0.7e-4], 1e-8);
    let infl = inflated_newton(s.as_ref(), &u0, p, &InflationConfig { newton_tol: 1e-14, ..Default::default() }).unwrap();
    let (plain, _) = newton_correct(s.as_ref(), &u0, p, 1e-14, 20).unwrap();
    for (a, b) in infl.u.iter().zip(&plain) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }
}

#[test]
fn singular_iterate_still_progresses() {
    // On the axis x = 0 the ex11 Jacobian is singular. Plain Newton cannot
    // take a step there; the inflated update is still defined and reduces the
    // residual, although it stays on the axis because F has no x-gradient there.
    let s = sys("ex11");
    let (u0, p) = (vec![0.0, 1.5e-4], 1e-8);
    assert!(matches!(newton_correct(s.as_ref(), &u0, p, 1e-12, 5), Err(BaselineError::SingularMatrix(_))));
    let r0 = norm2(&evaluate(s.as_ref(), &u0, p).unwrap());
    let cfg = InflationConfig { newton_tol: 1e-14, newton_cap: 3, ..Default::default() };
    let best = match inflated_newton(s.as_ref(), &u0, p, &cfg) {
        Ok(o) => o.residual,
        Err(bifurcation_core::inflation::InflationError::NoConvergence { best_residual, .. }) => best_residual,
        Err(e) => panic!("{e}"),
    };
    assert!(best < 0.5 * r0, "{best} vs {r0}");
}

#[test]
fn pde1d_near_fold_converges() {
    let params = ProblemParams { grid_n: Some(80), d: None };
    let s = builtin::<f64>("pde1d", &params).unwrap();
    let u0 = default_start("pde1d", &params, 18.0, 2).unwrap();
    let mut cfg = RunConfig::new("pde1d", 18.0, -0.4, 0.0);
    cfg.tracker.newton_tol = 1e-8;
    cfg.fold_limit = Some(1);
    let r = run_adaptive(s.as_ref(), &u0, &cfg).unwrap();
    let pt = r.branches[0]
        .points
        .iter()
        .min_by(|a, b| a.lambda_min.abs().total_cmp(&b.lambda_min.abs()))
        .unwrap();
    let pert: Vec<f64> = pt.u.iter().enumerate().map(|(i, x)| x + 1e-2 * (i as f64 * 0.37).sin()).collect();
    let out = inflated_newton(s.as_ref(), &pert, pt.p, &InflationConfig { newton_tol: 1e-9, ..Default::default() }).unwrap();
    assert!(out.residual <= 1e-9 && out.iterations <= 12, "{out:?}");
}

fn random_square(n: usize, data: &[f64]) -> DenseMatrix<f64> {
    DenseMatrix::from_fn(n, n, |i, j| data[i * 20 + j])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn inflated_system_structure(
        n in 2usize..21,
        data in prop::collection::vec(-1.0f64..1.0, 400),
        f in prop::collection::vec(-1.0f64..1.0, 20),
        k in prop::sample::select(vec![-1.0f64, 0.5, 3.0]),
    ) {
        let j = random_square(n, &data);
        let f = &f[..n];
        let inf = assemble_inflated(&j, f).unwrap();
        let scale = inf.matrix.max_abs().max(1.0);
        // Symmetric positive semidefinite.
        for r in 0..=n {
            for c in 0..=n {
                prop_assert_eq!(inf.matrix[(r, c)], inf.matrix[(c, r)]);
            }
        }
        let (vals, _) = symmetric_eigen(&inf.matrix).unwrap();
        prop_assert!(vals[0] >= -1e-10 * scale);
        // (v, −1) is in the kernel.
        let mut kv = inf.v.clone();
        kv.push(-1.0);
        prop_assert!(norm2(&inf.matrix.matvec(&kv)) <= 1e-10 * scale);
        // Δu does not move along the kernel, and equals the Newton step.
        let Ok(newton) = solve_dense(&j, &f.iter().map(|x| -x).collect::<Vec<_>>()) else { return Ok(()) };
        let mut raw = newton.clone();
        raw.push(0.0);
        let shifted: Vec<f64> = raw.iter().zip(&kv).map(|(r, q)| r + k * q).collect();
        let a = InflationUpdate::from_raw(&raw, &inf.v, 0);
        let b = InflationUpdate::from_raw(&shifted, &inf.v, 0);
        let nn = norm2(&newton).max(1.0);
        for i in 0..n {
            prop_assert!((a.delta_u[i] - b.delta_u[i]).abs() <= 1e-12 * nn);
        }
        let res: Vec<f64> = inf.matrix.matvec(&shifted).iter().zip(&inf.rhs).map(|(x, y)| x - y).collect();
        prop_assert!(norm2(&res) <= 1e-8 * scale * nn);
    }

    #[test]
    fn inflated_solve_matches_newton(
        n in 2usize..8,
        data in prop::collection::vec(-1.0f64..1.0, 400),
        f in prop::collection::vec(-1.0f64..1.0, 20),
    ) {
        let j = random_square(n, &data).add_diag(2.0);
        let f = &f[..n];
        let newton = solve_dense(&j, &f.iter().map(|x| -x).collect::<Vec<_>>()).unwrap();
        let inf = assemble_inflated(&j, f).unwrap();
        let up = solve_inflated(&inf, 1e-13 * norm2(&inf.rhs).max(1e-300), 200_000);
        prop_assume!(up.is_ok());
        let up = up.unwrap();
        let nn = norm2(&newton).max(1.0);
        for i in 0..n {
            prop_assert!((up.delta_u[i] - newton[i]).abs() <= 1e-6 * nn, "{:?} vs {:?}", up.delta_u, newton);
        }
    }
}
