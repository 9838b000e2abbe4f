//! Rate function of the least-squares estimator and its reverse
//! I-projection onto the stable matrices.
//!
//! For a stable `θ` with stationary covariance `S_θ`,
//!
//! ```text
//! I(θ', θ) = ½ tr(S_w⁻¹ (θ' − θ) S_θ (θ' − θ)ᵀ)
//! ```
//!
//! and the projection of `θ'` is the stable minimizer of `I(θ', ·)`. It is
//! approximated for small `δ > 0` by the closed loop of an LQR problem,
//!
//! ```text
//! θ*_δ = θ' + dlqr(θ', I, Q, (2δ S_w)⁻¹) = (I + 2δ S_w P_δ)⁻¹ θ',
//! ```
//!
//! where `P_δ` solves `P = Q + θ'ᵀ P (I + 2δ S_w P)⁻¹ θ'`.

use std::fmt;

use num_complex::Complex64;
use serde::{Serialize, Serializer};

use crate::densela::{self, classify, CMatrix, Matrix, Stability, SymmetricEigen};
use crate::error::{Error, Result};
use crate::lyapunov::solve_dlyap;
use crate::riccati::solve_dare_inverse_weight;

pub const DEFAULT_DELTA: f64 = 1e-9;
pub const DEFAULT_RADIUS_CAP: f64 = 0.99;

/// Relative slack tolerated when checking that rates shrink with δ.
pub const MONOTONICITY_RTOL: f64 = 1e-7;

/// Largest accepted condition estimate of an eigenvector basis.
pub const MAX_EIGENBASIS_CONDITION: f64 = 1e10;

/// A rate value, with an explicit marker for the unstable second argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rate {
    Finite(f64),
    Infinite,
}

impl Rate {
    /// As a float, with `f64::INFINITY` for the marker.
    pub fn value(self) -> f64 {
        match self {
            Rate::Finite(v) => v,
            Rate::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Rate::Finite(_))
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rate::Finite(v) => write!(f, "{v}"),
            Rate::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Rate {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Rate::Finite(v) => s.serialize_f64(*v),
            Rate::Infinite => s.serialize_str("inf"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RateValue {
    pub value: Rate,
    pub theta_prime: Matrix,
    pub theta: Matrix,
}

/// `I(θ', θ)`; infinite when `θ` is not stable.
pub fn rate_function(theta_prime: &Matrix, theta: &Matrix, s_w: &Matrix) -> Result<RateValue> {
    Ok(RateValue {
        value: rate(theta_prime, theta, s_w)?,
        theta_prime: theta_prime.clone(),
        theta: theta.clone(),
    })
}

/// [`rate_function`] without copying the arguments into the result.
pub fn rate(theta_prime: &Matrix, theta: &Matrix, s_w: &Matrix) -> Result<Rate> {
    let n = theta.ensure_square()?;
    theta_prime.ensure_same_shape(theta, "rate arguments")?;
    if s_w.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "S_w must be {n}x{n}, found {}x{}",
            s_w.rows(),
            s_w.cols()
        )));
    }
    if classify(densela::spectral_radius(theta)?) != Stability::Stable {
        return Ok(Rate::Infinite);
    }
    let s_theta = solve_dlyap(theta, s_w)?.s;
    Ok(Rate::Finite(quadratic_rate(theta_prime, theta, s_w, &s_theta)?))
}

/// ½ tr(S_w⁻¹ D S Dᵀ) with D = θ' − θ.
fn quadratic_rate(theta_prime: &Matrix, theta: &Matrix, s_w: &Matrix, s_theta: &Matrix) -> Result<f64> {
    let d = theta_prime - theta;
    let inner = d.congruence(s_theta);
    let v = 0.5 * densela::solve_linear(s_w, &inner)?.trace();
    Ok(v.max(0.0))
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectionResult {
    pub theta_star: Matrix,
    pub delta: f64,
    /// Riccati solution; absent when the input was already stable.
    pub p_delta: Option<Matrix>,
    /// `θ*_δ − θ'`.
    pub gain: Matrix,
    /// `I(θ', θ*_δ)`.
    pub rate_at_star: f64,
    pub spectral_radius_star: f64,
    /// `√(2 κ(S_w) I(θ', θ*_δ))`.
    pub epsilon: f64,
    /// `√(κ(S_w) I(θ', θ*_δ))`, the smaller constant also found in the
    /// literature; reported for comparison only.
    pub epsilon_kappa: f64,
    pub was_already_stable: bool,
    pub riccati_residual: f64,
    pub riccati_iterations: usize,
}

/// Projects `θ'` onto the stable matrices. Stable inputs are returned
/// unchanged; otherwise `θ*_δ` is computed from the LQR closed loop.
pub fn reverse_i_projection(
    theta_prime: &Matrix,
    s_w: &Matrix,
    q: &Matrix,
    delta: f64,
) -> Result<ProjectionResult> {
    let n = theta_prime.ensure_square()?;
    if s_w.shape() != (n, n) || q.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "theta' is {n}x{n}, S_w {}x{}, Q {}x{}",
            s_w.rows(),
            s_w.cols(),
            q.rows(),
            q.cols()
        )));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Config(format!("delta must be positive, got {delta}")));
    }
    densela::check_spd(s_w, "S_w")?;
    densela::check_spd(q, "Q")?;

    let rho = densela::spectral_radius(theta_prime)?;
    if classify(rho) == Stability::Stable {
        return Ok(ProjectionResult {
            theta_star: theta_prime.clone(),
            delta,
            p_delta: None,
            gain: Matrix::zeros(n, n),
            rate_at_star: 0.0,
            spectral_radius_star: rho,
            epsilon: 0.0,
            epsilon_kappa: 0.0,
            was_already_stable: true,
            riccati_residual: 0.0,
            riccati_iterations: 0,
        });
    }

    let sol = solve_dare_inverse_weight(theta_prime, &s_w.scale(2.0 * delta), q)?;
    let theta_star = theta_prime + &sol.k;
    let rho_star = densela::spectral_radius(&theta_star)?;
    if classify(rho_star) != Stability::Stable {
        return Err(Error::ClosedLoopUnstable { rho: rho_star });
    }
    let rate_at_star = rate(theta_prime, &theta_star, s_w)?.value();
    let kappa = densela::condition_number(s_w, true)?;
    Ok(ProjectionResult {
        theta_star,
        delta,
        p_delta: Some(sol.p),
        gain: sol.k,
        rate_at_star,
        spectral_radius_star: rho_star,
        epsilon: (2.0 * kappa * rate_at_star).sqrt(),
        epsilon_kappa: (kappa * rate_at_star).sqrt(),
        was_already_stable: false,
        riccati_residual: sol.residual,
        riccati_iterations: sol.iterations,
    })
}

/// `ε = √(2 κ(S_w) I(θ̂, P(θ̂)))`, which bounds `‖θ̂ − P(θ̂)‖₂`.
pub fn epsilon_bound(theta_hat: &Matrix, projection: &ProjectionResult, s_w: &Matrix) -> Result<f64> {
    if projection.was_already_stable {
        return Ok(0.0);
    }
    let r = rate(theta_hat, &projection.theta_star, s_w)?.value();
    Ok((2.0 * densela::condition_number(s_w, true)? * r).sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct RadiusBracket {
    /// Smallest rate observed along the sweep.
    pub r_lower: f64,
    /// `I(θ', 0)`.
    pub r_upper: f64,
    /// `(δ, I(θ', θ*_δ))` pairs in sweep order.
    pub delta_grid: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DeltaSweep {
    pub bracket: RadiusBracket,
    pub projections: Vec<ProjectionResult>,
    /// `tr(Q S_{θ*_δ})` per δ; nonincreasing in δ.
    pub trace_objectives: Vec<f64>,
    /// False if the trace objectives break monotonicity beyond tolerance.
    pub trace_monotone: bool,
}

/// Projects `θ'` for every δ of a strictly decreasing list and checks that
/// the attained rate shrinks along with δ.
pub fn delta_sweep(theta_prime: &Matrix, s_w: &Matrix, q: &Matrix, deltas: &[f64]) -> Result<DeltaSweep> {
    if deltas.is_empty() {
        return Err(Error::Config("empty delta list".into()));
    }
    if deltas.iter().any(|&d| !(d > 0.0 && d.is_finite())) || deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config(
            "deltas must be positive and strictly decreasing".into(),
        ));
    }
    let projections = deltas
        .iter()
        .map(|&d| reverse_i_projection(theta_prime, s_w, q, d))
        .collect::<Result<Vec<_>>>()?;

    let rates: Vec<f64> = projections.iter().map(|p| p.rate_at_star).collect();
    for (i, w) in rates.windows(2).enumerate() {
        if w[1] > w[0] + MONOTONICITY_RTOL * w[0].abs().max(1e-300) {
            return Err(Error::MonotonicityViolation(format!(
                "rate {} at delta {:e} exceeds rate {} at delta {:e}",
                w[1],
                deltas[i + 1],
                w[0],
                deltas[i]
            )));
        }
    }

    let trace_objectives = projections
        .iter()
        .map(|p| Ok((q * &solve_dlyap(&p.theta_star, s_w)?.s).trace()))
        .collect::<Result<Vec<f64>>>()?;
    // δ decreases along the list, so the objective may only grow
    let trace_monotone = trace_objectives
        .windows(2)
        .all(|w| w[1] >= w[0] - MONOTONICITY_RTOL * w[0].abs());

    let r_upper = rate(theta_prime, &Matrix::zeros(theta_prime.rows(), theta_prime.cols()), s_w)?.value();
    let r_lower = rates.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(DeltaSweep {
        bracket: RadiusBracket {
            r_lower,
            r_upper,
            delta_grid: deltas.iter().copied().zip(rates).collect(),
        },
        projections,
        trace_objectives,
        trace_monotone,
    })
}

/// Eigenvalue clipping baseline: every eigenvalue with modulus above
/// `radius_cap` is scaled radially onto the circle of that radius, and the
/// real part of the reassembled matrix is returned.
pub fn clip_eigenvalues(theta_prime: &Matrix, radius_cap: f64) -> Result<Matrix> {
    let n = theta_prime.ensure_square()?;
    if !(radius_cap > 0.0 && radius_cap < 1.0) {
        return Err(Error::Config(format!(
            "radius cap must lie in (0, 1), got {radius_cap}"
        )));
    }
    let spectrum = densela::eigenvalues(theta_prime)?;
    if spectrum.spectral_radius() <= radius_cap {
        return Ok(theta_prime.clone());
    }
    let v = densela::eigenvectors(theta_prime, &spectrum);
    let identity: Vec<Complex64> = (0..n * n)
        .map(|k| Complex64::new(if k / n == k % n { 1.0 } else { 0.0 }, 0.0))
        .collect();
    let v_inv = v
        .solve(&identity, n)
        .map(|data| CMatrix { n, data })
        .ok_or(Error::DefectiveMatrix {
            condition: f64::INFINITY,
        })?;
    let condition = v.frobenius() * v_inv.frobenius();
    if !condition.is_finite() || condition > MAX_EIGENBASIS_CONDITION {
        return Err(Error::DefectiveMatrix { condition });
    }
    let clipped: Vec<Complex64> = spectrum
        .eigenvalues
        .iter()
        .map(|&l| {
            let r = l.norm();
            if r > radius_cap {
                l * (radius_cap / r)
            } else {
                l
            }
        })
        .collect();
    let out = Matrix::from_fn(n, n, |i, j| {
        (0..n)
            .map(|k| v.get(i, k) * clipped[k] * v_inv.get(k, j))
            .sum::<Complex64>()
            .re
    });
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct StructureReport {
    /// det(Λ_δ) with Λ_δ = I + 2δ S_w P_δ.
    pub lambda_det: f64,
    /// ‖Λ_δ θ*_δ − θ'‖_F / ‖θ'‖_F.
    pub lambda_residual: f64,
    /// Dimension of the numerical kernel of θ'.
    pub kernel_dim: usize,
    /// max ‖θ*_δ v‖ over unit kernel vectors v of θ'.
    pub max_kernel_leak: f64,
}

pub const KERNEL_RTOL: f64 = 1e-10;
pub const STRUCTURE_TOL: f64 = 1e-8;

/// Verifies `θ*_δ = Λ_δ⁻¹ θ'` with invertible `Λ_δ` and that the kernel of
/// `θ'` is mapped to zero by `θ*_δ`.
pub fn structure_check(theta_prime: &Matrix, projection: &ProjectionResult, s_w: &Matrix) -> Result<StructureReport> {
    let n = theta_prime.ensure_square()?;
    let lambda = match &projection.p_delta {
        Some(p) => &Matrix::identity(n) + &(&s_w.scale(2.0 * projection.delta) * p),
        None => Matrix::identity(n),
    };
    let lambda_det = densela::determinant(&lambda)?;
    if lambda_det.abs() < 1e-12 {
        return Err(Error::StructureViolation(format!(
            "Lambda is numerically singular (det {lambda_det:e})"
        )));
    }
    let lambda_residual = densela::frobenius_norm(&(&(&lambda * &projection.theta_star) - theta_prime))
        / densela::frobenius_norm(theta_prime).max(f64::MIN_POSITIVE);
    if lambda_residual > STRUCTURE_TOL {
        return Err(Error::StructureViolation(format!(
            "Lambda theta* differs from theta' by {lambda_residual:e}"
        )));
    }

    let kernel = numerical_kernel(theta_prime)?;
    let max_kernel_leak = kernel
        .iter()
        .map(|v| projection.theta_star.mul_vec(v).iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    if max_kernel_leak > STRUCTURE_TOL {
        return Err(Error::StructureViolation(format!(
            "kernel vector of theta' mapped to norm {max_kernel_leak:e}"
        )));
    }
    Ok(StructureReport {
        lambda_det,
        lambda_residual,
        kernel_dim: kernel.len(),
        max_kernel_leak,
    })
}

/// Unit right-singular vectors whose singular value is below
/// `KERNEL_RTOL · σ_max`.
pub fn numerical_kernel(a: &Matrix) -> Result<Vec<Vec<f64>>> {
    let e = SymmetricEigen::new(&(&a.transpose() * a))?;
    let smax = e.max().max(0.0).sqrt();
    Ok((0..a.cols())
        .filter(|&k| e.values[k].max(0.0).sqrt() <= KERNEL_RTOL * smax || smax == 0.0)
        .map(|k| e.vectors.col_vec(k))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Matrix {
        Matrix::scalar(v)
    }

    #[test]
    fn rate_zero_on_diagonal() {
        let t = Matrix::from_rows(&[&[0.5, 0.1], &[0.0, 0.3]]).unwrap();
        assert_eq!(rate(&t, &t, &Matrix::identity(2)).unwrap(), Rate::Finite(0.0));
    }

    #[test]
    fn scalar_rate_formula() {
        let r = rate(&scalar(0.9), &scalar(0.5), &scalar(1.0)).unwrap().value();
        assert!((r - 0.5 * 0.16 / 0.75).abs() < 1e-9);
        assert!((r - 0.10667).abs() < 1e-5);
    }

    #[test]
    fn rate_at_zero_is_half_frobenius() {
        let tp = Matrix::from_rows(&[&[1.0, 2.0], &[-0.5, 3.0]]).unwrap();
        let r = rate(&tp, &Matrix::zeros(2, 2), &Matrix::identity(2)).unwrap().value();
        let f = densela::frobenius_norm(&tp);
        assert!((r - 0.5 * f * f).abs() < 1e-12);
    }

    #[test]
    fn rate_infinite_for_unstable_target() {
        let r = rate(&scalar(0.5), &scalar(1.0), &scalar(1.0)).unwrap();
        assert_eq!(r, Rate::Infinite);
        assert_eq!(serde_json::to_string(&r).unwrap(), "\"inf\"");
        assert_eq!(r.to_string(), "inf");
    }

    #[test]
    fn stable_input_is_fixed() {
        let p = reverse_i_projection(&scalar(0.5), &scalar(2.0), &scalar(3.0), 1e-3).unwrap();
        assert!(p.was_already_stable);
        assert_eq!(p.theta_star, scalar(0.5));
        assert_eq!(p.rate_at_star, 0.0);
        assert!(p.p_delta.is_none());
    }

    #[test]
    fn scalar_projection_to_reciprocal() {
        let p = reverse_i_projection(&scalar(1.5), &scalar(1.0), &scalar(1.0), DEFAULT_DELTA).unwrap();
        assert!((p.theta_star[(0, 0)] - 2.0 / 3.0).abs() < 1e-4);
        assert!(!p.was_already_stable);
        // θ* = (1 + 2δP)⁻¹ θ'
        let pd = p.p_delta.as_ref().unwrap()[(0, 0)];
        assert!((p.theta_star[(0, 0)] - 1.5 / (1.0 + 2.0 * DEFAULT_DELTA * pd)).abs() < 1e-8);
    }

    #[test]
    fn epsilon_scalar_example() {
        let p = reverse_i_projection(&scalar(1.5), &scalar(1.0), &scalar(1.0), DEFAULT_DELTA).unwrap();
        let eps = epsilon_bound(&scalar(1.5), &p, &scalar(1.0)).unwrap();
        assert!((eps - 1.25f64.sqrt()).abs() < 1e-3);
        assert!((p.rate_at_star - 0.625).abs() < 1e-3);
        assert!((1.5 - p.theta_star[(0, 0)]).abs() <= eps);
        assert!((p.epsilon - eps).abs() < 1e-12);
    }

    #[test]
    fn epsilon_zero_when_stable() {
        let p = reverse_i_projection(&scalar(0.2), &scalar(1.0), &scalar(1.0), DEFAULT_DELTA).unwrap();
        assert_eq!(epsilon_bound(&scalar(0.2), &p, &scalar(1.0)).unwrap(), 0.0);
    }

    #[test]
    fn bad_delta_rejected() {
        let e = reverse_i_projection(&scalar(1.5), &scalar(1.0), &scalar(1.0), 0.0).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
    }

    #[test]
    fn clip_examples() {
        let stable = Matrix::from_rows(&[&[0.5, 0.3], &[0.0, 0.2]]).unwrap();
        assert_eq!(clip_eigenvalues(&stable, 0.99).unwrap(), stable);
        let d = clip_eigenvalues(&Matrix::diag(&[2.0, 0.5]), 0.99).unwrap();
        assert!(d.approx_eq(&Matrix::diag(&[0.99, 0.5]), 1e-9));
        assert!(matches!(clip_eigenvalues(&stable, 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn clip_rejects_defective() {
        let jordan = Matrix::from_rows(&[&[1.5, 1.0], &[0.0, 1.5]]).unwrap();
        assert!(matches!(
            clip_eigenvalues(&jordan, 0.99),
            Err(Error::DefectiveMatrix { .. })
        ));
    }

    #[test]
    fn sweep_rejects_unsorted() {
        let e = delta_sweep(&scalar(1.5), &scalar(1.0), &scalar(1.0), &[1e-6, 1e-3]).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
    }

    #[test]
    fn sweep_of_stable_input() {
        let s = delta_sweep(&scalar(0.4), &scalar(1.0), &scalar(1.0), &[1e-3, 1e-6]).unwrap();
        assert!(s.projections.iter().all(|p| p.was_already_stable));
        assert_eq!(s.bracket.r_lower, 0.0);
    }

    #[test]
    fn kernel_of_rank_one() {
        let a = Matrix::from_rows(&[&[2.0, 2.0], &[1.0, 1.0]]).unwrap();
        let k = numerical_kernel(&a).unwrap();
        assert_eq!(k.len(), 1);
        assert!((k[0][0] + k[0][1]).abs() < 1e-12);
    }
}
