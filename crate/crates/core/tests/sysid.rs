mod common;

use common::*;
use proptest::prelude::*;
use stablearn::densela::{self, Matrix};
use stablearn::stabproj::rate_function;
use stablearn::sysid::{
    least_squares, least_squares_multi, normal_equation_residual, simulate, transformed_estimate, InitMode,
    LinearSystem, Trajectory,
};
use stablearn::Error;

fn scalar_system(theta: f64, s_w: f64, init: InitMode) -> LinearSystem {
    LinearSystem::new(Matrix::scalar(theta), Matrix::scalar(s_w), init).unwrap()
}

fn sample_variance(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let m = xs.clone().sum::<f64>() / n;
    (m, xs.map(|x| (x - m).powi(2)).sum::<f64>() / n)
}

#[test]
fn white_noise_covariance_converges() {
    let t = 100_000;
    let traj = simulate(&scalar_system(0.0, 2.0, InitMode::Zero), t, 11).unwrap();
    assert_eq!(traj.states[0], vec![0.0]);
    let second_moment = traj.states[1..].iter().map(|x| x[0] * x[0]).sum::<f64>() / t as f64;
    let tol = 5.0 / (t as f64).sqrt();
    assert!((second_moment - 2.0).abs() / 2.0 <= tol, "{second_moment}");
}

#[test]
fn stationary_variance_matches_lyapunov() {
    let traj = simulate(&scalar_system(0.9, 1.0, InitMode::Stationary), 100_000, 5).unwrap();
    let (_, var) = sample_variance(traj.states.iter().map(|x| x[0]));
    let exact = 1.0 / (1.0 - 0.81);
    assert!((var - exact).abs() / exact < 0.1, "{var} vs {exact}");
}

#[test]
fn consistent_scalar_estimate() {
    let sys = scalar_system(0.5, 1.0, InitMode::Stationary);
    let mean_err = (0..100)
        .map(|seed| (least_squares(&simulate(&sys, 10_000, seed).unwrap()).unwrap().theta_hat[(0, 0)] - 0.5).abs())
        .sum::<f64>()
        / 100.0;
    assert!(mean_err <= 0.05, "{mean_err}");
}

#[test]
fn exact_recovery_from_noise_free_data() {
    let mut rng = rng(3);
    for n in 1..=5 {
        let m = gaussian(&mut rng, n, n);
        let trajs: Vec<Trajectory> = (0..n)
            .map(|i| {
                let x0: Vec<f64> = (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect();
                let x1 = m.mul_vec(&x0);
                let x2 = m.mul_vec(&x1);
                Trajectory::new(vec![x0, x1, x2], 0, 0).unwrap()
            })
            .collect();
        let est = least_squares_multi(&trajs).unwrap();
        assert!(rel_diff(&est.theta_hat, &m) < 1e-10, "n = {n}");
        assert_eq!(est.t, 2 * n);
    }
}

#[test]
fn normal_equations_hold() {
    let mut rng = rng(17);
    for case in 0..40 {
        let n = 1 + case % 6;
        let theta = with_radius(&mut rng, n, 0.2 + 0.75 * (case as f64 / 40.0));
        let s_w = spd(&mut rng, n, 0.1);
        let sys = LinearSystem::new(theta, s_w, InitMode::Stationary).unwrap();
        let traj = simulate(&sys, 20 * n + 10, case as u64).unwrap();
        let est = least_squares(&traj).unwrap();
        assert!(normal_equation_residual(&[traj], &est.theta_hat) <= 1e-8);
        assert!(est.gram.is_symmetric(0.0));
        assert!(densela::SymmetricEigen::new(&est.gram).unwrap().min() > 0.0);
    }
}

#[test]
fn change_of_coordinates_is_equivariant() {
    let mut rng = rng(23);
    for n in [2, 3, 4] {
        let theta = with_radius(&mut rng, n, 0.8);
        let sys = LinearSystem::new(theta, Matrix::identity(n), InitMode::Stationary).unwrap();
        let traj = simulate(&sys, 200, n as u64).unwrap();
        let p = spd(&mut rng, n, 0.5);
        let half = densela::sqrt_spd(&p).unwrap();
        let inv_half = densela::inv_sqrt_spd(&p).unwrap();
        let moved = Trajectory::new(traj.states.iter().map(|x| half.mul_vec(x)).collect(), 0, 0).unwrap();
        let a = least_squares(&traj).unwrap().theta_hat;
        let b = least_squares(&moved).unwrap().theta_hat;
        assert!(rel_diff(&b, &(&(&half * &a) * &inv_half)) < 1e-8);
    }
}

#[test]
fn transformed_estimate_rate_identity() {
    let mut rng = rng(29);
    for case in 0..50 {
        let n = 1 + case % 4;
        let theta = with_radius(&mut rng, n, 0.9);
        let theta_hat = &theta + &gaussian(&mut rng, n, n).scale(0.05);
        let s_w = spd(&mut rng, n, 0.2);
        let t = 100 + 37 * case;
        let a_t = (t as f64).sqrt();
        let moved = transformed_estimate(&theta_hat, &theta, t, a_t).unwrap();
        let lhs = rate_function(&theta_hat, &theta, &s_w).unwrap().value.value();
        let rhs = a_t / t as f64 * rate_function(&moved, &theta, &s_w).unwrap().value.value();
        assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(f64::MIN_POSITIVE), "{lhs} vs {rhs}");
    }
}

#[test]
fn seeds_and_systems_separate_streams() {
    let a = scalar_system(0.5, 1.0, InitMode::Zero);
    let b = scalar_system(0.5, 1.0, InitMode::Stationary);
    assert_ne!(a.digest(), b.digest());
    let ta = simulate(&a, 100, 1).unwrap();
    assert_eq!(ta, simulate(&a, 100, 1).unwrap());
    assert_ne!(ta.system_digest, simulate(&b, 100, 1).unwrap().system_digest);
}

#[test]
fn given_initial_state() {
    let sys = LinearSystem::new(
        Matrix::identity(2).scale(0.5),
        Matrix::identity(2),
        InitMode::Given(vec![3.0, -4.0]),
    )
    .unwrap();
    assert_eq!(simulate(&sys, 3, 0).unwrap().states[0], vec![3.0, -4.0]);
    let bad = LinearSystem::new(Matrix::identity(2), Matrix::identity(2), InitMode::Given(vec![1.0]));
    assert!(matches!(bad, Err(Error::DimensionMismatch(_))));
    assert!(matches!(simulate(&sys, 0, 0), Err(Error::TooShort(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trajectory_text_is_exact(seed in any::<u64>(), n in 1usize..4, t in 1usize..30) {
        let sys = LinearSystem::new(Matrix::identity(n).scale(0.7), Matrix::identity(n), InitMode::Stationary).unwrap();
        let traj = simulate(&sys, t, seed).unwrap();
        let back = Trajectory::from_text(&traj.to_text()).unwrap();
        prop_assert_eq!(back.states, traj.states);
        prop_assert_eq!(back.seed, seed);
    }

    #[test]
    fn estimate_is_seed_deterministic(seed in any::<u64>()) {
        let sys = LinearSystem::new(Matrix::identity(2).scale(0.3), Matrix::identity(2), InitMode::Stationary).unwrap();
        let a = least_squares(&simulate(&sys, 50, seed).unwrap()).unwrap();
        let b = least_squares(&simulate(&sys, 50, seed).unwrap()).unwrap();
        prop_assert_eq!(a.theta_hat, b.theta_hat);
    }
}
