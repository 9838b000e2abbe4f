mod common;

use common::*;
use num_complex::Complex64;
use stablearn::densela::{self, Matrix};

fn char_poly_residual(a: &Matrix, lambda: Complex64) -> f64 {
    // |det(A − λI)| via complex Gaussian elimination, relative to ‖A‖^n
    let n = a.rows();
    let mut m: Vec<Complex64> = (0..n * n)
        .map(|k| {
            let (i, j) = (k / n, k % n);
            Complex64::new(a.get(i, j), 0.0) - if i == j { lambda } else { Complex64::new(0.0, 0.0) }
        })
        .collect();
    let mut det = Complex64::new(1.0, 0.0);
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| m[x * n + c].norm().total_cmp(&m[y * n + c].norm())).unwrap();
        if p != c {
            for j in 0..n {
                m.swap(c * n + j, p * n + j);
            }
            det = -det;
        }
        let piv = m[c * n + c];
        det *= piv;
        if piv.norm() == 0.0 {
            return 0.0;
        }
        for i in c + 1..n {
            let f = m[i * n + c] / piv;
            for j in c..n {
                let v = m[c * n + j];
                m[i * n + j] -= f * v;
            }
        }
    }
    let scale = densela::operator_norm(a).unwrap().max(1.0);
    det.norm() / scale.powi(n as i32)
}

#[test]
fn eigenvalues_match_nalgebra_and_char_poly() {
    let mut r = rng(11);
    for trial in 0..200 {
        let n = 1 + trial % 8;
        let a = gaussian(&mut r, n, n);
        let ours = densela::eigenvalues(&a).unwrap();
        assert_eq!(ours.len(), n);
        let theirs = to_na(&a).complex_eigenvalues();
        let mut t: Vec<Complex64> = theirs.iter().map(|z| Complex64::new(z.re, z.im)).collect();
        t.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        let o = ours.sorted();
        for (x, y) in o.iter().zip(&t) {
            assert!((x - y).norm() < 1e-8 * (1.0 + y.norm()), "{x} vs {y}");
        }
        if n <= 4 {
            for l in &ours.eigenvalues {
                assert!(char_poly_residual(&a, *l) < 1e-10);
            }
        }
        // conjugate pairs
        for l in &ours.eigenvalues {
            if l.im != 0.0 {
                assert!(ours.eigenvalues.iter().any(|m| (m - l.conj()).norm() < 1e-10));
            }
        }
    }
}

#[test]
fn spectrum_invariant_under_similarity() {
    let mut r = rng(12);
    for trial in 0..100 {
        let n = 2 + trial % 6;
        let a = gaussian(&mut r, n, n);
        let p = &gaussian(&mut r, n, n) + &Matrix::identity(n).scale(3.0);
        let b = &(&p * &a) * &densela::inverse(&p).unwrap();
        let sa = densela::eigenvalues(&a).unwrap().sorted();
        let sb = densela::eigenvalues(&b).unwrap().sorted();
        let scale = densela::spectral_radius(&a).unwrap().max(1.0);
        for (x, y) in sa.iter().zip(&sb) {
            assert!((x - y).norm() <= 1e-8 * scale, "{x} vs {y}");
        }
    }
}

#[test]
fn frobenius_squared_equals_singular_value_sum() {
    let mut r = rng(13);
    for trial in 0..50 {
        let (m, n) = (1 + trial % 5, 1 + (trial / 5) % 5);
        let a = gaussian(&mut r, m, n);
        let sv = to_na(&a).singular_values();
        let ssq: f64 = sv.iter().map(|s| s * s).sum();
        let f = densela::frobenius_norm(&a);
        assert!((f * f - ssq).abs() <= 1e-12 * ssq.max(1.0));
        let op = densela::operator_norm(&a).unwrap();
        assert!((op - sv.max()).abs() <= 1e-10 * sv.max());
    }
}

#[test]
fn condition_number_matches_svd() {
    let mut r = rng(14);
    for _ in 0..50 {
        let a = &gaussian(&mut r, 4, 4) + &Matrix::identity(4).scale(4.0);
        let sv = to_na(&a).singular_values();
        let k = densela::condition_number(&a, false).unwrap();
        assert!((k - sv.max() / sv.min()).abs() <= 1e-8 * k);
    }
}

#[test]
fn sqrt_reconstructs_random_spd() {
    let mut r = rng(15);
    for n in 1..8 {
        let s = spd(&mut r, n, 0.5);
        let root = densela::sqrt_spd(&s).unwrap();
        assert!(root.is_symmetric(1e-14));
        assert!(rel_diff(&(&root * &root), &s) < 1e-10);
    }
}

#[test]
fn solve_reproduces_rhs_for_moderate_condition() {
    let mut r = rng(16);
    for n in 1..10 {
        let a = &gaussian(&mut r, n, n) + &Matrix::identity(n).scale(0.5);
        if densela::condition_number(&a, false).map_or(true, |k| k > 1e8) {
            continue;
        }
        let b = gaussian(&mut r, n, 3);
        let x = densela::solve_linear(&a, &b).unwrap();
        let res = densela::operator_norm(&(&(&a * &x) - &b)).unwrap();
        let bound = 1e-10 * densela::operator_norm(&a).unwrap() * densela::operator_norm(&x).unwrap();
        assert!(res <= bound);
    }
}
