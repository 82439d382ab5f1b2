use approx::assert_abs_diff_eq;
use bifurcation_core::linalg::{norm2, norm_inf};
use bifurcation_core::model::{
    builtin, evaluate, fd_jacobian_p, fd_jacobian_u, jacobian_fd_discrepancy, jacobian_p, jacobian_u, registry,
    validate_jacobians, Ex22, ModelError, ParametricSystem, ProblemParams, PROBLEM_NAMES,
};
use bifurcation_core::pde::{
    build_competition, build_pde1d, cosine_guesses, find_solutions, initial_resident, pde1d_solutions, Grid1D,
};
use bifurcation_core::pipeline::default_start;
use proptest::prelude::*;

const ANALYTIC: [&str; 5] = ["ex11", "ilex", "ex21", "ex22", "ex23"];

fn sys(name: &str) -> Box<dyn ParametricSystem<f64>> {
    builtin(name, &ProblemParams::default()).unwrap()
}

fn small(name: &str, n: usize) -> Box<dyn ParametricSystem<f64>> {
    builtin(name, &ProblemParams { grid_n: Some(n), d: None }).unwrap()
}

#[test]
fn documented_points_are_solutions() {
    assert_eq!(evaluate(sys("ex11").as_ref(), &[-1.0, 1.0], 1.0).unwrap(), vec![0.0, 0.0]);
    assert_eq!(evaluate(sys("ilex").as_ref(), &[-1.0, 2.0], 1.0).unwrap(), vec![0.0, 0.0]);
    assert_eq!(evaluate(sys("ex22").as_ref(), &[0.0], 0.0).unwrap(), vec![0.0]);
    assert_eq!(evaluate(sys("ex21").as_ref(), &[1.0], 1.0).unwrap(), vec![0.0]);
}

#[test]
fn dimension_mismatch() {
    let s = sys("ex11");
    assert!(matches!(evaluate(s.as_ref(), &[1.0], 0.0), Err(ModelError::DimensionMismatch { expected: 2, found: 1 })));
    assert!(jacobian_u(s.as_ref(), &[1.0, 2.0, 3.0], 0.0).is_err());
}

#[test]
fn unknown_problem() {
    assert!(matches!(builtin::<f64>("nope", &ProblemParams::default()), Err(ModelError::UnknownProblem(_))));
}

#[test]
fn ex11_jacobians_by_hand() {
    let s = sys("ex11");
    let j = jacobian_u(s.as_ref(), &[-1.0, 1.0], 1.0).unwrap();
    assert_eq!(j.as_slice(), &[-2.0, 0.0, -2.0, -4.0]);
    assert_eq!(jacobian_p(s.as_ref(), &[-1.0, 1.0], 1.0).unwrap(), vec![-1.0, 1.0]);
}

#[test]
fn ex21_jacobians_vanish_at_origin() {
    let s = sys("ex21");
    assert_eq!(jacobian_u(s.as_ref(), &[0.0], 0.0).unwrap()[(0, 0)], 0.0);
    assert_eq!(jacobian_p(s.as_ref(), &[0.0], 0.0).unwrap(), vec![0.0]);
}

#[test]
fn ex22_circle_intersection() {
    let s = sys("ex22");
    let p = 0.75f64.sqrt();
    assert_abs_diff_eq!(evaluate(s.as_ref(), &[0.5], p).unwrap()[0], 0.0, epsilon = 1e-15);
    assert_abs_diff_eq!(jacobian_u(s.as_ref(), &[0.5], p).unwrap()[(0, 0)], 0.0, epsilon = 1e-15);
    let (a, b) = Ex22::factors(0.5, p);
    assert_abs_diff_eq!(a, 0.0, epsilon = 1e-15);
    assert_abs_diff_eq!(b, 0.0, epsilon = 1e-15);
}

#[test]
fn ex23_diagonal_is_a_solution() {
    let s = sys("ex23");
    for k in 0..=100 {
        let t = -1.0 + 2.0 * k as f64 / 100.0;
        assert_abs_diff_eq!(evaluate(s.as_ref(), &[t], t).unwrap()[0], 0.0, epsilon = 1e-14);
    }
}

#[test]
fn analytic_jacobians_match_finite_differences() {
    for name in ANALYTIC {
        let err = validate_jacobians(sys(name).as_ref(), 20, 2.0, 7, 1e-5);
        assert!(err.is_ok(), "{name}: {err:?}");
    }
}

#[test]
fn pde_jacobians_match_finite_differences() {
    let pde = small("pde1d", 30);
    let u: Vec<f64> = (0..29).map(|i| (i as f64 * 0.3).cos()).collect();
    let d = jacobian_fd_discrepancy(pde.as_ref(), &[(u, 5.0)]).unwrap();
    assert!(d <= 1e-4, "pde1d {d:e}");

    let st = initial_resident(0.2, 1.0, 24).unwrap();
    let comp = build_competition::<f64>(24, 1.0).unwrap();
    let mut z = st.to_vector();
    z[0] += 0.05;
    for (i, x) in z.iter_mut().enumerate().skip(1) {
        *x += 0.01 * (i as f64).sin();
    }
    let d = jacobian_fd_discrepancy(&comp, &[(z, 0.2)]).unwrap();
    assert!(d <= 1e-4, "competition {d:e}");
}

/// Max error of the central-difference Jacobians against the analytic ones.
fn fd_error(s: &dyn ParametricSystem<f64>, u: &[f64], p: f64, step: f64) -> f64 {
    let ju = s.analytic_jacobian_u(u, p).unwrap();
    let jp = s.analytic_jacobian_p(u, p).unwrap();
    let du = ju.sub(&fd_jacobian_u(s, u, p, step)).max_abs();
    let dp = jp.iter().zip(fd_jacobian_p(s, u, p, step)).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    du.max(dp)
}

#[test]
fn finite_differences_are_second_order() {
    // ex11 is quadratic, so its central differences are exact; ilex and ex21
    // have cubic and quartic terms and show the h² error.
    let ex11 = sys("ex11");
    assert!(fd_error(ex11.as_ref(), &[0.3, -0.7], 0.4, 1e-2) <= 1e-12);
    for (name, u, p) in [("ilex", vec![0.3, -0.7], 0.9), ("ex21", vec![0.4], -0.3)] {
        let s = sys(name);
        let e1 = fd_error(s.as_ref(), &u, p, 1e-2);
        let e2 = fd_error(s.as_ref(), &u, p, 5e-3);
        let ratio = e1 / e2;
        assert!((3.6..=4.4).contains(&ratio), "{name}: ratio {ratio}");
    }
}

#[test]
fn registry_starts_are_solutions() {
    for e in registry() {
        let (s, u0) = match e.name {
            "pde1d" => (small("pde1d", 60), default_start("pde1d", &ProblemParams { grid_n: Some(60), d: None }, e.p0, 1).unwrap()),
            "competition" => {
                (small("competition", 60), default_start("competition", &ProblemParams { grid_n: Some(60), d: None }, e.p0, 1).unwrap())
            }
            _ => (sys(e.name), e.u0.clone().unwrap()),
        };
        let r = norm2(&evaluate(s.as_ref(), &u0, e.p0).unwrap());
        assert!(r <= 1e-8, "{}: residual {r:e}", e.name);
    }
    assert_eq!(registry().len(), PROBLEM_NAMES.len());
}

#[test]
fn grid_validation() {
    assert!(Grid1D::<f64>::new(2).is_err());
    let g = Grid1D::<f64>::new(5).unwrap();
    assert_eq!(g.h, 0.25);
    assert!(g.nodes.windows(2).all(|w| w[1] > w[0]));
    assert!(build_pde1d::<f64>(2).is_err());
    assert!(build_competition::<f64>(10, 0.0).is_err());
}

#[test]
fn pde1d_trivial_branch() {
    let s = small("pde1d", 50);
    let f = evaluate(s.as_ref(), &vec![0.0; 49], 7.0).unwrap();
    assert!(f.iter().all(|&x| x == 0.0));
    let set = find_solutions(s.as_ref(), 7.0, &[vec![0.0; 49]], 1e-6).unwrap();
    assert_eq!(set.solutions.len(), 1);
    assert!(norm_inf(&set.solutions[0]) == 0.0);
}

#[test]
fn pde1d_truncation_is_second_order() {
    // u*(x) = cos(πx/2) solves u_xx = u²(u² − p) + f with f = u*_xx − u*²(u*² − p).
    let p = 3.0;
    let pi2 = std::f64::consts::FRAC_PI_2;
    let err = |n: usize| {
        let s = build_pde1d::<f64>(n).unwrap();
        let x = &s.grid.nodes;
        let u: Vec<f64> = x[..n - 1].iter().map(|&t| (pi2 * t).cos()).collect();
        let f = evaluate(&s, &u, p).unwrap();
        u.iter()
            .zip(&f)
            .map(|(&ui, &fi)| {
                let exact = -pi2 * pi2 * ui - ui * ui * (ui * ui - p);
                (fi - exact).abs()
            })
            .fold(0.0f64, f64::max)
    };
    let (e40, e80, e160) = (err(40), err(80), err(160));
    assert!((3.5..=4.5).contains(&(e40 / e80)), "{e40:e} {e80:e}");
    assert!((3.5..=4.5).contains(&(e80 / e160)), "{e80:e} {e160:e}");
}

#[test]
fn pde1d_seven_solutions_at_p18() {
    let s = build_pde1d::<f64>(360).unwrap();
    let set = pde1d_solutions(&s, 18.0).unwrap();
    assert!(set.solutions.len() >= 7, "found {}", set.solutions.len());
    for u in &set.solutions {
        assert!(norm_inf(&evaluate(&s, u, 18.0).unwrap()) <= 1e-9);
    }
    for (i, a) in set.solutions.iter().enumerate() {
        for b in &set.solutions[i + 1..] {
            let d = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            assert!(d > 1e-4);
        }
    }
}

#[test]
fn dedupe_is_idempotent() {
    let s = build_pde1d::<f64>(80).unwrap();
    let g = cosine_guesses::<f64>(&s.grid, &[2.0, -3.0], &[1, 3]);
    let once = find_solutions(&s, 18.0, &g, 1e-4).unwrap();
    let mut doubled = g.clone();
    doubled.extend(g);
    let twice = find_solutions(&s, 18.0, &doubled, 1e-4).unwrap();
    assert_eq!(once.solutions.len(), twice.solutions.len());
}

#[test]
fn competition_rows() {
    let c = build_competition::<f64>(40, 1.0).unwrap();
    assert_abs_diff_eq!(c.trapezoid(&vec![1.0; 40]), 1.0, epsilon = 1e-14);
    let st = initial_resident(0.01, 1.0, 320).unwrap();
    assert_eq!(st.beta, 0.01);
    let c320 = build_competition::<f64>(320, 1.0).unwrap();
    assert_abs_diff_eq!(c320.trapezoid(&st.v), 1.0, epsilon = 1e-12);
    let f = evaluate(&c320, &st.to_vector(), 0.01).unwrap();
    assert!(norm2(&f) <= 1e-8, "residual {:e}", norm2(&f));
}

#[test]
fn competition_diagonal_symmetry() {
    // With β = α and v = u/∫u the invader rows are the resident rows scaled by 1/∫u.
    for alpha in [0.05, 0.3, 0.6] {
        let st = initial_resident(alpha, 1.0, 80).unwrap();
        let c = build_competition::<f64>(80, 1.0).unwrap();
        let f = evaluate(&c, &st.to_vector(), alpha).unwrap();
        assert!(norm_inf(&f) <= 1e-8, "alpha {alpha}: {:e}", norm_inf(&f));
    }
}

#[test]
fn f32_systems() {
    let s = builtin::<f32>("ex11", &ProblemParams::default()).unwrap();
    assert_eq!(evaluate(s.as_ref(), &[-1.0f32, 1.0], 1.0).unwrap(), vec![0.0f32, 0.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn jacobians_agree_at_random_points(k in 0usize..5, u in prop::collection::vec(-2.0f64..2.0, 2), p in -2.0f64..2.0) {
        let s = sys(ANALYTIC[k]);
        let u = &u[..s.dim()];
        let d = jacobian_fd_discrepancy(s.as_ref(), &[(u.to_vec(), p)]).unwrap();
        prop_assert!(d <= 1e-5);
    }
}
