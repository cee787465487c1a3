mod common;

use bs_spectra::spectral::*;
use bs_spectra::torus::{harper, QuantumTorusParams};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

/// Number of eigenvalues of `a` below `x`: negative pivots of the LDLᴴ
/// factorization of `a − x·I` (Sylvester inertia).
fn count_below(a: &DMatrix<Complex64>, x: f64) -> usize {
    let n = a.nrows();
    let mut m = a.clone();
    for i in 0..n {
        m[(i, i)] -= Complex64::new(x, 0.0);
    }
    let mut negatives = 0;
    for j in 0..n {
        let mut d = m[(j, j)].re;
        if d == 0.0 {
            d = -f64::EPSILON * (1.0 + x.abs());
        }
        if d < 0.0 {
            negatives += 1;
        }
        for i in j + 1..n {
            let l = m[(i, j)] / d;
            for c in j + 1..n {
                let t = l * m[(j, c)];
                m[(i, c)] -= t;
            }
        }
    }
    negatives
}

/// Eigenvalues by bisection on the inertia count.
fn bisection_eigenvalues(a: &DMatrix<Complex64>) -> Vec<f64> {
    let bound = a.iter().map(|z| z.norm()).sum::<f64>() + 1.0;
    (0..a.nrows())
        .map(|j| {
            let (mut lo, mut hi) = (-bound, bound);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if count_below(a, mid) > j {
                    hi = mid
                } else {
                    lo = mid
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

fn hermitian4() -> impl Strategy<Value = DMatrix<Complex64>> {
    prop::collection::vec(-1.0f64..1.0, 32).prop_map(|v| {
        let g = DMatrix::from_fn(4, 4, |i, j| Complex64::new(v[4 * i + j], v[16 + 4 * i + j]));
        (&g + g.adjoint()) * Complex64::new(0.5, 0.0)
    })
}

fn harper_k(k: i64) -> DMatrix<Complex64> {
    harper(QuantumTorusParams::new(k).unwrap()).into_matrix()
}

#[test]
fn lowest_harper_eigenvalue_k50() {
    let s = eigh(&harper_k(50), false).unwrap();
    let target = -4.0 + std::f64::consts::PI / 50.0;
    assert!((s.eigenvalues[0] - target).abs() <= 10.0 / 2500.0);
}

#[test]
fn harper_spectrum_is_symmetric() {
    for k in [1, 2, 3, 10, 50, 500] {
        let s = eigh(&harper_k(k), false).unwrap();
        let n = s.dim();
        for j in 0..n {
            assert!((s.eigenvalues[j] + s.eigenvalues[n - 1 - j]).abs() <= 1e-10, "k={k} j={j}");
        }
    }
}

#[test]
fn operator_norm_approaches_four() {
    let n50 = operator_norm(&harper_k(50)).unwrap();
    let n500 = operator_norm(&harper_k(500)).unwrap();
    assert!((n500 - 4.0).abs() < 0.1);
    assert!((n500 - 4.0).abs() < (n50 - 4.0).abs());
}

#[test]
fn vectors_are_certified() {
    let s = eigh(&harper_k(40), true).unwrap();
    assert!(s.orthonormality_defect.unwrap() <= 1e-10);
    assert!(s.max_residual() <= s.residual_bound());
    let v = s.eigenvectors.as_ref().unwrap();
    let h = harper_k(40);
    let lhs = &h * v.column(3);
    let rhs = v.column(3) * Complex64::new(s.eigenvalues[3], 0.0);
    assert!((lhs - rhs).norm() < 1e-12);
}

#[test]
fn complex_input_uses_full_certificate() {
    // Harper plus a genuinely complex Hermitian perturbation
    let mut h = harper_k(8);
    h[(0, 3)] += Complex64::new(0.0, 0.3);
    h[(3, 0)] -= Complex64::new(0.0, 0.3);
    let s = eigh(&h, true).unwrap();
    assert!(s.max_residual() < 1e-12);
    let oracle = bisection_eigenvalues(&h);
    for (a, b) in s.eigenvalues.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn matches_inertia_bisection_oracle(a in hermitian4()) {
        let s = eigh(&a, true).unwrap();
        let oracle = bisection_eigenvalues(&a);
        for (x, y) in s.eigenvalues.iter().zip(&oracle) {
            prop_assert!((x - y).abs() <= 1e-9, "{x} vs {y}");
        }
        prop_assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(s.orthonormality_defect.unwrap() <= 1e-10);
        prop_assert!(s.max_residual() <= s.residual_bound());
    }

    #[test]
    fn harper_symmetry_for_any_k(k in 1i64..60) {
        let s = eigh(&harper_k(k), false).unwrap();
        let n = s.dim();
        for j in 0..n {
            prop_assert!((s.eigenvalues[j] + s.eigenvalues[n - 1 - j]).abs() <= 1e-10);
        }
    }
}
