use mmap_rel::matkit::{expm, expm_integral, kron, solve_normalized, Lu};
use mmap_rel::{Mat, Mat32, Matrix};
use proptest::prelude::*;

fn small_matrix(n: usize, scale: f64) -> impl Strategy<Value = Mat> {
    proptest::collection::vec(-scale..scale, n * n).prop_map(move |v| Matrix::from_vec(n, n, v).unwrap())
}

/// Truncated Taylor series, fine for matrices with small norm.
fn taylor_exp(a: &Mat, terms: usize) -> Mat {
    let n = a.rows();
    let mut term = Matrix::identity(n);
    let mut sum = Matrix::identity(n);
    for k in 1..terms {
        term = (&term * a).scale(1.0 / k as f64);
        sum += &term;
    }
    sum
}

/// Random generator: nonnegative off-diagonal, zero row sums.
fn generator(n: usize) -> impl Strategy<Value = Mat> {
    proptest::collection::vec(0.0..3.0f64, n * n).prop_map(move |v| {
        let mut q = Matrix::from_vec(n, n, v).unwrap();
        for i in 0..n {
            q[(i, i)] = 0.0;
            let s: f64 = q.row(i).iter().sum();
            q[(i, i)] = -s;
        }
        q
    })
}

proptest! {
    #[test]
    fn kron_mixed_product(a in small_matrix(2, 2.0), b in small_matrix(3, 2.0),
                          c in small_matrix(2, 2.0), d in small_matrix(3, 2.0)) {
        let lhs = &kron(&a, &b) * &kron(&c, &d);
        let rhs = kron(&(&a * &c), &(&b * &d));
        prop_assert!((&lhs - &rhs).max_abs() < 1e-10);
    }

    #[test]
    fn expm_matches_taylor_for_small_norm(a in small_matrix(4, 0.3)) {
        let e = expm(&a, 1.0).unwrap();
        prop_assert!((&e - &taylor_exp(&a, 30)).max_abs() < 1e-13);
    }

    #[test]
    fn expm_semigroup(q in generator(5), s in 0.0..4.0f64, t in 0.0..4.0f64) {
        let lhs = expm(&q, s + t).unwrap();
        let rhs = &expm(&q, s).unwrap() * &expm(&q, t).unwrap();
        prop_assert!((&lhs - &rhs).max_abs() < 1e-12);
    }

    #[test]
    fn expm_of_generator_is_stochastic(q in generator(6), t in 0.0..50.0f64) {
        let p = expm(&q, t).unwrap();
        for s in p.row_sums() {
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
        prop_assert!(p.as_slice().iter().all(|&x| x > -1e-14));
    }

    #[test]
    fn integral_derivative_is_exponential(q in generator(4), t in 0.5..5.0f64) {
        let h = 1e-5;
        let fd = (&expm_integral(&q, t + h).unwrap() - &expm_integral(&q, t - h).unwrap()).scale(0.5 / h);
        prop_assert!((&fd - &expm(&q, t).unwrap()).max_abs() < 1e-7);
    }

    #[test]
    fn lu_solves(a in small_matrix(5, 1.0), b in proptest::collection::vec(-1.0..1.0f64, 5)) {
        let shifted = &a + &Matrix::identity(5).scale(6.0);
        let x = Lu::factor(&shifted).unwrap().solve(&b);
        let back = shifted.mul_vec(&x);
        for (u, v) in back.iter().zip(&b) {
            prop_assert!((u - v).abs() < 1e-12);
        }
    }
}

#[test]
fn expm_large_norm_scalar_case() {
    let q = Matrix::from_rows(&[[-50.0, 50.0], [0.0, 0.0]]).unwrap();
    let p = expm(&q, 3.0).unwrap();
    let a = (-150.0f64).exp();
    assert!((p[(0, 0)] - a).abs() < 1e-15);
    assert!((p[(0, 1)] - (1.0 - a)).abs() < 1e-13);
}

#[test]
fn integral_of_scalar_rate() {
    // ∫₀ᵗ e^{−λu} du = (1 − e^{−λt})/λ
    let q = Matrix::scalar(-2.0);
    let m = expm_integral(&q, 1.5).unwrap();
    assert!((m[(0, 0)] - (1.0 - (-3.0f64).exp()) / 2.0).abs() < 1e-14);
}

#[test]
fn expm_zero_time_is_identity() {
    let q = Matrix::from_rows(&[[-1.0, 1.0], [2.0, -2.0]]).unwrap();
    assert_eq!(expm(&q, 0.0).unwrap(), Matrix::identity(2));
    assert!(expm(&q, -1.0).is_err());
}

#[test]
fn stationary_of_two_state_chain() {
    let q = Matrix::from_rows(&[[-1.0, 1.0], [2.0, -2.0]]).unwrap();
    let pi: Vec<f64> = solve_normalized(&q, &[1.0, 1.0]).unwrap();
    assert!((pi[0] - 2.0 / 3.0).abs() < 1e-15);
    assert!((pi[1] - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn single_precision_exponential() {
    let q: Mat32 = Matrix::from_rows(&[[-1.0f32, 1.0], [2.0, -2.0]]).unwrap();
    let p = expm(&q, 10.0).unwrap();
    assert!((p[(0, 0)] - 2.0 / 3.0).abs() < 1e-5);
}

#[test]
fn dimension_errors() {
    let a = Matrix::<f64>::zeros(2, 3);
    let b = Matrix::<f64>::zeros(2, 3);
    assert!(a.try_mul(&b).is_err());
    assert!(a.inverse().is_err());
    assert!(Matrix::<f64>::zeros(2, 2).inverse().is_err());
}
