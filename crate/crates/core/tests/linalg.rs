use approx::assert_abs_diff_eq;
use bifurcation_core::linalg::{
    gauss_seidel, min_abs_real_eigenpair, norm2, null_space, solve_dense, symmetric_eigen, DenseMatrix, LinalgError,
};
use bifurcation_core::report::{gs_problem, gs_table, GS_EPSILONS};
use proptest::prelude::*;

fn m(rows: &[&[f64]]) -> DenseMatrix<f64> {
    DenseMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
}

/// Cramer's rule for 3×3, used as an independent oracle.
fn cramer3(a: &DenseMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let det = |c: [[f64; 3]; 3]| {
        c[0][0] * (c[1][1] * c[2][2] - c[1][2] * c[2][1]) - c[0][1] * (c[1][0] * c[2][2] - c[1][2] * c[2][0])
            + c[0][2] * (c[1][0] * c[2][1] - c[1][1] * c[2][0])
    };
    let base: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| a[(i, j)]));
    let d = det(base);
    (0..3)
        .map(|k| {
            let mut c = base;
            for i in 0..3 {
                c[i][k] = b[i];
            }
            det(c) / d
        })
        .collect()
}

#[test]
fn solve_identity() {
    let x = solve_dense(&DenseMatrix::identity(3), &[1.0, 2.0, 3.0]).unwrap();
    assert_eq!(x, vec![1.0, 2.0, 3.0]);
}

#[test]
fn solve_matches_cramer() {
    let (a, b) = gs_problem();
    let a1 = a.add_diag(1.0);
    let x = solve_dense(&a1, &b).unwrap();
    let oracle = cramer3(&a1, &b);
    for (xi, oi) in x.iter().zip(&oracle) {
        assert_abs_diff_eq!(xi, oi, epsilon = 1e-13);
    }
    // Frozen: (A + I)x = b solved by hand.
    let frozen = [-0.625, -0.25, 0.875];
    for (xi, fi) in x.iter().zip(&frozen) {
        assert_abs_diff_eq!(xi, fi, epsilon = 1e-14);
    }
}

#[test]
fn singular_matrix_is_reported() {
    let (a, b) = gs_problem();
    assert!(matches!(solve_dense(&a, &b), Err(LinalgError::SingularMatrix { .. })));
}

#[test]
fn eigen_diagonal() {
    let e = min_abs_real_eigenpair(&DenseMatrix::from_diag(&[-2.0, -4.0])).unwrap();
    assert_abs_diff_eq!(e.re, -2.0, epsilon = 1e-12);
    assert_abs_diff_eq!(e.vector[0], 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(e.vector[1], 0.0, epsilon = 1e-12);
}

#[test]
fn eigen_lower_triangular() {
    // Characteristic polynomial (λ+2)(λ+4); (A + 2I)v = 0 gives v ∝ (1, −1).
    let e = min_abs_real_eigenpair(&m(&[&[-2.0, 0.0], &[-2.0, -4.0]])).unwrap();
    assert_abs_diff_eq!(e.re, -2.0, epsilon = 1e-12);
    let s = 0.5f64.sqrt();
    assert_abs_diff_eq!(e.vector[0], s, epsilon = 1e-12);
    assert_abs_diff_eq!(e.vector[1], -s, epsilon = 1e-12);
}

#[test]
fn eigen_rotation_has_zero_real_part() {
    let a = m(&[&[0.0, 1.0], &[-1.0, 0.0]]);
    let e = min_abs_real_eigenpair(&a).unwrap();
    assert_abs_diff_eq!(e.re, 0.0, epsilon = 1e-12);
    assert_abs_diff_eq!(e.im.abs(), 1.0, epsilon = 1e-12);
    let n = (norm2(&e.vector).powi(2) + norm2(&e.vector_im).powi(2)).sqrt();
    assert_abs_diff_eq!(n, 1.0, epsilon = 1e-12);
    assert!(e.residual <= 1e-8);
}

#[test]
fn null_space_examples() {
    let z = null_space(&m(&[&[0.0, 0.0]]));
    assert_eq!(z.len(), 2);
    assert!(null_space(&DenseMatrix::<f64>::identity(3)).is_empty());
    let q = null_space(&m(&[&[1.0, 1.0], &[1.0, 1.0]]));
    assert_eq!(q.len(), 1);
    let s = 0.5f64.sqrt();
    assert_abs_diff_eq!(q[0][0].abs(), s, epsilon = 1e-12);
    assert_abs_diff_eq!(q[0][0] + q[0][1], 0.0, epsilon = 1e-12);
}

#[test]
fn gauss_seidel_table_rows() {
    let (a, b) = gs_problem();
    let a1 = a.add_diag(1.0);
    assert_eq!(gauss_seidel(&a1, &b, &b, &a1, 1e-8, 10_000).unwrap().iterations, 18);
    assert_eq!(gauss_seidel(&a, &b, &b, &a, 1e-8, 10_000).unwrap().iterations, 2);
    let id = DenseMatrix::<f64>::identity(4);
    let b4 = [3.0, -1.0, 0.5, 2.0];
    assert!(gauss_seidel(&id, &b4, &b4, &id, 1e-12, 10).unwrap().iterations <= 1);
}

#[test]
fn gauss_seidel_cap_carries_best_iterate() {
    let (a, b) = gs_problem();
    let m = a.add_diag(1e-4);
    match gauss_seidel(&m, &b, &b, &m, 1e-8, 10) {
        Err(LinalgError::IterationCapExceeded { cap, best, .. }) => {
            assert_eq!(cap, 10);
            assert_eq!(best.len(), 3);
        }
        other => panic!("expected cap error, got {other:?}"),
    }
}

#[test]
fn gs_table_counts() {
    let counts: Vec<Option<usize>> = gs_table().into_iter().map(|(_, k)| k).collect();
    assert_eq!(counts, vec![Some(18), Some(100), Some(852), Some(6982), Some(54470), Some(2)]);
}

#[test]
fn gs_table_monotone_then_drop() {
    let rows = gs_table();
    let counts: Vec<usize> = rows.iter().map(|r| r.1.unwrap()).collect();
    assert_eq!(rows.len(), GS_EPSILONS.len());
    for w in counts[..5].windows(2) {
        assert!(w[1] > w[0]);
    }
    assert!(counts[5] < counts[0]);
}

#[test]
fn gauss_seidel_deterministic() {
    let (a, b) = gs_problem();
    let m = a.add_diag(1e-2);
    let r1 = gauss_seidel(&m, &b, &b, &m, 1e-8, 100_000).unwrap();
    let r2 = gauss_seidel(&m, &b, &b, &m, 1e-8, 100_000).unwrap();
    assert_eq!(r1, r2);
}

#[test]
fn f32_solve() {
    let a = DenseMatrix::<f32>::from_rows(&[vec![4.0, 1.0], vec![1.0, 3.0]]);
    let x = solve_dense(&a, &[1.0f32, 2.0]).unwrap();
    assert!((x[0] - 1.0 / 11.0).abs() < 1e-6);
    assert!((x[1] - 7.0 / 11.0).abs() < 1e-6);
}

fn matrix_strategy(min: usize, max: usize) -> impl Strategy<Value = (usize, Vec<f64>)> {
    (min..=max).prop_flat_map(|n| (Just(n), prop::collection::vec(-1.0f64..1.0, n * n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn solve_multiplies_back((n, data) in matrix_strategy(2, 50), b in prop::collection::vec(-1.0f64..1.0, 50)) {
        // Diagonal shift keeps the matrix well conditioned.
        let a = DenseMatrix::from_row_slice(n, n, &data).add_diag(n as f64);
        let b = &b[..n];
        let x = solve_dense(&a, b).unwrap();
        let r: Vec<f64> = a.matvec(&x).iter().zip(b).map(|(p, q)| p - q).collect();
        prop_assert!(norm2(&r) <= 1e-8 * (a.norm_fro() * norm2(&x) + norm2(b)));
    }

    #[test]
    fn eigen_matches_symmetric_oracle((n, data) in matrix_strategy(2, 12)) {
        let a = DenseMatrix::from_row_slice(n, n, &data);
        let s = DenseMatrix::from_fn(n, n, |i, j| a[(i, j)] + a[(j, i)]);
        let (vals, _) = symmetric_eigen(&s).unwrap();
        let oracle = vals.iter().copied().min_by(|x, y| x.abs().partial_cmp(&y.abs()).unwrap()).unwrap();
        let e = min_abs_real_eigenpair(&s).unwrap();
        prop_assert!((e.re.abs() - oracle.abs()).abs() <= 1e-8);
        prop_assert!((norm2(&e.vector) - 1.0).abs() <= 1e-12);
        prop_assert!(e.residual <= 1e-8 * s.norm_fro().max(1.0));
    }

    #[test]
    fn null_space_is_orthonormal_kernel(rows in 1usize..6, cols in 2usize..7, rank in 0usize..4, seed in prop::collection::vec(-1.0f64..1.0, 80)) {
        // Product of thin factors has rank at most `rank`.
        let r = rank.min(rows).min(cols);
        let l = DenseMatrix::from_fn(rows, r.max(1), |i, j| if r == 0 { 0.0 } else { seed[i * 4 + j] });
        let rt = DenseMatrix::from_fn(r.max(1), cols, |i, j| if r == 0 { 0.0 } else { seed[40 + i * 8 + j] });
        let a = l.matmul(&rt);
        let basis = null_space(&a);
        prop_assert!(basis.len() >= cols - r);
        let an = a.norm_fro().max(1e-300);
        for q in &basis {
            prop_assert!(norm2(&a.matvec(q)) <= 1e-8 * an.max(1.0));
        }
        for (i, qi) in basis.iter().enumerate() {
            for (j, qj) in basis.iter().enumerate() {
                let d: f64 = qi.iter().zip(qj).map(|(x, y)| x * y).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((d - want).abs() <= 1e-10);
            }
        }
    }
}
