mod common;

use common::*;
use stablearn::densela::{self, Matrix};
use stablearn::stabproj::{
    clip_eigenvalues, delta_sweep, epsilon_bound, rate, reverse_i_projection, structure_check,
    DEFAULT_DELTA,
};

fn y_matrix() -> Matrix {
    Matrix::from_rows(&[&[0.95, 0.1, 1.0], &[-0.1, 0.95, 0.0], &[0.0, 0.0, 0.9]]).unwrap()
}

#[test]
fn scalar_projection_matches_grid_search() {
    let grid = scalar_grid_minimizer(1.5);
    // frozen: the grid oracle lands on 0.666667, stationarity gives 1/θ'
    assert!((grid - 0.666_667).abs() < 1e-6);
    assert!(((1.5 - grid) * (1.5 * grid - 1.0)).abs() < 1e-5);
    let p = reverse_i_projection(&Matrix::scalar(1.5), &Matrix::scalar(1.0), &Matrix::scalar(1.0), DEFAULT_DELTA)
        .unwrap();
    assert!((p.theta_star[(0, 0)] - grid).abs() < 1e-4);
}

#[test]
fn all_ones_projection() {
    for n in [2usize, 3, 5] {
        let tp = Matrix::filled(n, n, 2.0 / n as f64);
        let eye = Matrix::identity(n);
        let p = reverse_i_projection(&tp, &eye, &eye, DEFAULT_DELTA).unwrap();
        let expected = 1.0 / (2.0 * n as f64);
        assert!(p.theta_star.as_slice().iter().all(|v| (v - expected).abs() < 1e-4), "{:?}", p.theta_star);
    }
}

#[test]
fn all_ones_other_scales_keep_structure() {
    // only the structure is asserted for α ≠ 2/n
    for n in [2usize, 3] {
        for alpha in [1.0 / n as f64 + 0.1, 3.0 / n as f64] {
            let tp = Matrix::filled(n, n, alpha);
            let eye = Matrix::identity(n);
            let p = reverse_i_projection(&tp, &eye, &eye, DEFAULT_DELTA).unwrap();
            let v0 = p.theta_star[(0, 0)];
            assert!(p.theta_star.as_slice().iter().all(|v| (v - v0).abs() < 1e-8));
            assert!(p.spectral_radius_star < 1.0);
        }
    }
}

#[test]
fn sweep_on_scalar() {
    let s = delta_sweep(&Matrix::scalar(1.5), &Matrix::scalar(1.0), &Matrix::scalar(1.0), &[1e-3, 1e-6, 1e-9]).unwrap();
    let rates: Vec<f64> = s.bracket.delta_grid.iter().map(|d| d.1).collect();
    assert!(rates.windows(2).all(|w| w[1] <= w[0]));
    assert!((s.projections[2].theta_star[(0, 0)] - 2.0 / 3.0).abs() < 1e-4);
    assert!((s.bracket.r_upper - 0.5 * 2.25).abs() < 1e-12);
    assert!(s.bracket.r_lower <= s.bracket.r_upper);
    assert!(s.trace_monotone);
}

#[test]
fn sweep_on_doubled_example_matrix_is_cauchy() {
    let tp = y_matrix().scale(2.0);
    let eye = Matrix::identity(3);
    let s = delta_sweep(&tp, &eye, &eye, &[1e-3, 1e-6, 1e-9, 1e-10]).unwrap();
    assert!(s.projections.iter().all(|p| p.spectral_radius_star < 1.0));
    let d = densela::operator_norm(&(&s.projections[2].theta_star - &s.projections[3].theta_star)).unwrap();
    assert!(d <= 1e-4, "{d}");
}

#[test]
fn rate_is_coordinate_free() {
    let mut r = rng(41);
    for n in 1..6 {
        let tp = gaussian(&mut r, n, n);
        let theta = with_radius(&mut r, n, 0.8);
        let s_w = spd(&mut r, n, 0.3);
        let p = spd(&mut r, n, 0.5);
        let ph = densela::sqrt_spd(&p).unwrap();
        let ph_inv = densela::inverse(&ph).unwrap();
        let conj = |m: &Matrix| &(&ph * m) * &ph_inv;
        let a = rate(&tp, &theta, &s_w).unwrap().value();
        let b = rate(&conj(&tp), &conj(&theta), &(&(&ph * &s_w) * &ph).symmetrize()).unwrap().value();
        assert!((a - b).abs() <= 1e-7 * a.max(1e-12));
    }
}

#[test]
fn rate_blows_up_at_boundary() {
    let mut prev = 0.0;
    for k in 1..=7 {
        let v = rate(&Matrix::scalar(0.5), &Matrix::scalar(1.0 - 10f64.powi(-k)), &Matrix::scalar(1.0))
            .unwrap()
            .value();
        assert!(v > prev);
        prev = v;
    }
    assert!(prev > 1e3);
}

#[test]
fn projection_is_idempotent() {
    let mut r = rng(42);
    for n in 1..6 {
        let tp = with_radius(&mut r, n, 1.5);
        let s_w = spd(&mut r, n, 0.3);
        let q = Matrix::identity(n);
        let p = reverse_i_projection(&tp, &s_w, &q, DEFAULT_DELTA).unwrap();
        let again = reverse_i_projection(&p.theta_star, &s_w, &q, DEFAULT_DELTA).unwrap();
        assert!(again.was_already_stable);
        assert_eq!(again.theta_star, p.theta_star);
    }
}

#[test]
fn q_choice_does_not_matter_in_the_limit() {
    let mut r = rng(43);
    for n in 2..6 {
        let tp = with_radius(&mut r, n, 1.4);
        let s_w = Matrix::identity(n);
        let q2 = Matrix::diag(&(1..=n).map(|i| i as f64).collect::<Vec<_>>());
        let a = reverse_i_projection(&tp, &s_w, &Matrix::identity(n), DEFAULT_DELTA).unwrap();
        let b = reverse_i_projection(&tp, &s_w, &q2, DEFAULT_DELTA).unwrap();
        let d = densela::operator_norm(&(&a.theta_star - &b.theta_star)).unwrap();
        assert!(d <= 1e-3, "n={n}: {d}");
    }
}

#[test]
fn pinsker_and_epsilon_on_random_unstable() {
    let mut r = rng(44);
    for trial in 0..200 {
        let n = 1 + trial % 5;
        let tp = with_radius(&mut r, n, 1.05 + (trial % 7) as f64 * 0.2);
        let s_w = spd(&mut r, n, 0.3);
        let p = reverse_i_projection(&tp, &s_w, &Matrix::identity(n), DEFAULT_DELTA).unwrap();
        let eps = epsilon_bound(&tp, &p, &s_w).unwrap();
        let dist = densela::operator_norm(&(&tp - &p.theta_star)).unwrap();
        assert!(dist <= eps * (1.0 + 1e-9), "trial {trial}: {dist} > {eps}");
        assert!(p.epsilon_kappa <= p.epsilon);
    }
}

#[test]
fn structure_examples() {
    let eye = Matrix::identity(2);
    let tp = Matrix::from_rows(&[&[2.0, 2.0], &[1.0, 1.0]]).unwrap();
    let p = reverse_i_projection(&tp, &eye, &eye, DEFAULT_DELTA).unwrap();
    let rep = structure_check(&tp, &p, &eye).unwrap();
    assert_eq!(rep.kernel_dim, 1);
    let v = [1.0 / 2f64.sqrt(), -1.0 / 2f64.sqrt()];
    let out = p.theta_star.mul_vec(&v);
    assert!(out.iter().all(|x| x.abs() < 1e-8));

    let p = reverse_i_projection(&eye.scale(2.0), &eye, &eye, DEFAULT_DELTA).unwrap();
    let ts = &p.theta_star;
    assert!(ts[(0, 1)].abs() < 1e-12 && ts[(1, 0)].abs() < 1e-12);
    assert!((ts[(0, 0)] - ts[(1, 1)]).abs() < 1e-12 && ts[(0, 0)] > 0.0);
    // scalar analogue: 1/θ' = 0.5
    assert!((ts[(0, 0)] - 0.5).abs() < 1e-4);

    let stable = eye.scale(0.3);
    let p = reverse_i_projection(&stable, &eye, &eye, DEFAULT_DELTA).unwrap();
    let rep = structure_check(&stable, &p, &eye).unwrap();
    assert_eq!(rep.lambda_det, 1.0);
}

#[test]
fn shear_matrix_clipping_and_projection() {
    let tp = Matrix::from_rows(&[&[1.01, 10.0], &[0.01, 1.0]]).unwrap();
    let clipped = clip_eigenvalues(&tp, 0.99).unwrap();
    assert!((densela::spectral_radius(&clipped).unwrap() - 0.99).abs() < 1e-6);
    assert!(densela::operator_norm(&(&tp - &clipped)).unwrap() >= 4.0);
    let eye = Matrix::identity(2);
    let p = reverse_i_projection(&tp, &eye, &eye, DEFAULT_DELTA).unwrap();
    assert!(p.spectral_radius_star < 1.0);
}
