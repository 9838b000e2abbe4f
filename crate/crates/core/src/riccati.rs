//! Discrete algebraic Riccati equation and the LQR gain.
//!
//! The equation is handled in its inverse-weight form
//!
//! ```text
//! P = Q + Aᵀ P (I + G P)⁻¹ A,    G = B R⁻¹ Bᵀ
//! ```
//!
//! which is algebraically the standard DARE but never needs `R` itself. This
//! matters for the stable projection, where `R = (2δ S_w)⁻¹` is enormous for
//! tiny `δ` and `G = 2δ S_w` is what is actually available.
//!
//! The primary solver is the structure-preserving doubling algorithm (SDA);
//! a fixed-point (value) iteration is the fallback and an independent route
//! for cross-checks. The gain follows the `u = K x` convention, so the closed
//! loop is `A + B K`.

use serde::Serialize;

use crate::densela::{self, Lu, Matrix};
use crate::error::{Error, Result};
use crate::lyapunov::solve_stein;

/// Iteration cap of the fixed-point solver.
pub const FIXED_POINT_MAX_ITER: usize = 10_000;
const SDA_MAX_ITER: usize = 100;
const STEP_RTOL: f64 = 1e-12;
const NEWTON_STEPS: usize = 3;
const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DareMethod {
    Doubling,
    FixedPoint,
}

#[derive(Debug, Clone, Serialize)]
pub struct DareSolution {
    pub p: Matrix,
    pub k: Matrix,
    /// Relative residual of the defining equation.
    pub residual: f64,
    pub iterations: usize,
    pub method: DareMethod,
    /// Spectral radius of the closed loop `A + B K`.
    pub closed_loop_radius: f64,
}

/// Solves `P = Q + AᵀPA − AᵀPB(R + BᵀPB)⁻¹BᵀPA` and returns the gain
/// `K = −(R + BᵀPB)⁻¹BᵀPA`.
pub fn solve_dare(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<DareSolution> {
    let n = a.ensure_square()?;
    let m = b.cols();
    if b.rows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(Error::DimensionMismatch(format!(
            "A {n}x{n}, B {}x{m}, Q {}x{}, R {}x{}",
            b.rows(),
            q.rows(),
            q.cols(),
            r.rows(),
            r.cols()
        )));
    }
    densela::check_spd(q, "Q")?;
    densela::check_spd(r, "R")?;

    let g = (b * &densela::solve_linear(r, &b.transpose())?).symmetrize();
    let (p, iterations, method) = solve_inverse_form(a, &g, q)?;
    let (p, residual) = newton_refine(a, b, q, r, p)?;
    let k = standard_gain(a, b, r, &p)?;
    let closed_loop_radius = densela::spectral_radius(&(a + &(b * &k)))?;
    if closed_loop_radius >= 1.0 {
        return Err(Error::ClosedLoopUnstable {
            rho: closed_loop_radius,
        });
    }
    Ok(DareSolution {
        p,
        k,
        residual,
        iterations,
        method,
        closed_loop_radius,
    })
}

/// DARE with `B = I` and input weight given through its inverse `G = R⁻¹`.
///
/// The gain is `K = −(I + G P)⁻¹ G P A`, so that `A + K = (I + G P)⁻¹ A`.
pub fn solve_dare_inverse_weight(a: &Matrix, g: &Matrix, q: &Matrix) -> Result<DareSolution> {
    let n = a.ensure_square()?;
    if g.shape() != (n, n) || q.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "A is {n}x{n}, G {}x{}, Q {}x{}",
            g.rows(),
            g.cols(),
            q.rows(),
            q.cols()
        )));
    }
    densela::check_spd(q, "Q")?;
    densela::check_spd(g, "R inverse")?;

    let (p, iterations, method) = solve_inverse_form(a, g, q)?;
    let lambda = &Matrix::identity(n) + &(g * &p);
    let closed = densela::solve_linear(&lambda, a)?;
    let k = &closed - a;
    let residual = inverse_form_residual(a, g, q, &p)?;
    let closed_loop_radius = densela::spectral_radius(&closed)?;
    if closed_loop_radius >= 1.0 {
        return Err(Error::ClosedLoopUnstable {
            rho: closed_loop_radius,
        });
    }
    Ok(DareSolution {
        p,
        k,
        residual,
        iterations,
        method,
        closed_loop_radius,
    })
}

/// LQR gain for `x⁺ = A x + B u`, `u = K x`.
pub fn dlqr(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<Matrix> {
    Ok(solve_dare(a, b, q, r)?.k)
}

/// Relative residual of `P = Q + Aᵀ P (I + 2δ S_w P)⁻¹ A` for a candidate `P`.
pub fn riccati_equivalent_form_check(
    a: &Matrix,
    p: &Matrix,
    q: &Matrix,
    delta: f64,
    s_w: &Matrix,
) -> Result<f64> {
    inverse_form_residual(a, &s_w.scale(2.0 * delta), q, p)
}

/// ‖P − Q − AᵀP(I + GP)⁻¹A‖_F / ‖P‖_F.
pub fn inverse_form_residual(a: &Matrix, g: &Matrix, q: &Matrix, p: &Matrix) -> Result<f64> {
    let rhs = riccati_map(a, g, q, p)?;
    Ok(densela::frobenius_norm(&(p - &rhs)) / densela::frobenius_norm(p).max(f64::MIN_POSITIVE))
}

/// Residual of the standard form, with `R` used explicitly.
pub fn standard_residual(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix, p: &Matrix) -> Result<f64> {
    let at = a.transpose();
    let bt_p_a = &(&b.transpose() * p) * a;
    let inner = r + &b.transpose().congruence(p);
    let correction = &bt_p_a.transpose() * &densela::solve_linear(&inner, &bt_p_a)?;
    let rhs = (&(q + &(&(&at * p) * a)) - &correction).symmetrize();
    Ok(densela::frobenius_norm(&(p - &rhs)) / densela::frobenius_norm(p).max(f64::MIN_POSITIVE))
}

/// −(R + BᵀPB)⁻¹BᵀPA.
fn standard_gain(a: &Matrix, b: &Matrix, r: &Matrix, p: &Matrix) -> Result<Matrix> {
    let bt_p = &b.transpose() * p;
    Ok(-&densela::solve_linear(&(r + &(&bt_p * b)), &(&bt_p * a))?)
}

/// Newton steps on the standard form in defect-correction form: with
/// `K = K(P)` and `Ac = A + BK`, solve `E = AcᵀEAc + (Q + KᵀRK + AcᵀPAc − P)`
/// and set `P ← P + E`. Needed when `B R⁻¹ Bᵀ` is singular and `P` large,
/// where the doubling iterate stalls short of full accuracy. A step is kept
/// only if it lowers the residual.
fn newton_refine(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix, p: Matrix) -> Result<(Matrix, f64)> {
    let mut best = (standard_residual(a, b, q, r, &p)?, p);
    for _ in 0..NEWTON_STEPS {
        if best.0 <= RESIDUAL_TOL * 1e-3 {
            break;
        }
        let p = &best.1;
        let k = standard_gain(a, b, r, p)?;
        let closed = a + &(b * &k);
        let fixed = &(q + &k.transpose().congruence(r)) + &closed.transpose().congruence(p);
        let defect = (&fixed - p).symmetrize();
        let Ok(e) = solve_stein(&closed.transpose(), &defect) else {
            break;
        };
        let next = (p + &e).symmetrize();
        let res = standard_residual(a, b, q, r, &next)?;
        if !(res < best.0) {
            break;
        }
        best = (res, next);
    }
    Ok((best.1, best.0))
}

/// Q + Aᵀ P (I + G P)⁻¹ A.
fn riccati_map(a: &Matrix, g: &Matrix, q: &Matrix, p: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    let w = &Matrix::identity(n) + &(g * p);
    let x = densela::solve_linear(&w, a)?;
    Ok((q + &(&(&a.transpose() * p) * &x)).symmetrize())
}

fn solve_inverse_form(a: &Matrix, g: &Matrix, q: &Matrix) -> Result<(Matrix, usize, DareMethod)> {
    match structured_doubling(a, g, q) {
        Ok((p, it)) => Ok((p, it, DareMethod::Doubling)),
        Err(_) => {
            let (p, it) = fixed_point(a, g, q, FIXED_POINT_MAX_ITER)?;
            Ok((p, it, DareMethod::FixedPoint))
        }
    }
}

/// Structure-preserving doubling:
///
/// ```text
/// W = I + G_k H_k
/// A_{k+1} = A_k W⁻¹ A_k
/// G_{k+1} = G_k + A_k W⁻¹ G_k A_kᵀ
/// H_{k+1} = H_k + A_kᵀ H_k W⁻¹ A_k
/// ```
///
/// with `H_k → P` quadratically when the closed loop is stable.
pub fn structured_doubling(a: &Matrix, g: &Matrix, q: &Matrix) -> Result<(Matrix, usize)> {
    let n = a.rows();
    let eye = Matrix::identity(n);
    let (mut ak, mut gk, mut hk) = (a.clone(), g.clone(), q.clone());
    for it in 1..=SDA_MAX_ITER {
        let w = Lu::factor(&(&eye + &(&gk * &hk)))?;
        let winv_a = w.solve(&ak)?;
        let winv_g = w.solve(&gk)?;
        let h_next = (&hk + &(&(&ak.transpose() * &hk) * &winv_a)).symmetrize();
        let g_next = (&gk + &ak.congruence(&winv_g)).symmetrize();
        ak = &ak * &winv_a;
        let step = densela::frobenius_norm(&(&h_next - &hk));
        let size = densela::frobenius_norm(&h_next);
        if !size.is_finite() || !g_next.all_finite() {
            return Err(nonconv(it));
        }
        hk = h_next;
        gk = g_next;
        if step <= STEP_RTOL * size {
            return Ok((polish(a, g, q, hk)?, it));
        }
    }
    Err(nonconv(SDA_MAX_ITER))
}

fn nonconv(iterations: usize) -> Error {
    Error::NoConvergence {
        what: "structured doubling",
        iterations,
    }
}

/// A few fixed-point sweeps from a converged iterate; each one contracts
/// the error by the squared closed-loop radius.
fn polish(a: &Matrix, g: &Matrix, q: &Matrix, mut p: Matrix) -> Result<Matrix> {
    for _ in 0..3 {
        if inverse_form_residual(a, g, q, &p)? <= RESIDUAL_TOL * 1e-3 {
            break;
        }
        p = riccati_map(a, g, q, &p)?;
    }
    Ok(p)
}

/// Value iteration `P_{k+1} = Q + AᵀP_k(I + G P_k)⁻¹A` from `P_0 = Q`, with
/// the step halved whenever the residual grows.
pub fn fixed_point(a: &Matrix, g: &Matrix, q: &Matrix, max_iter: usize) -> Result<(Matrix, usize)> {
    let mut p = q.clone();
    let mut damping = 1.0;
    let mut last_residual = f64::INFINITY;
    for it in 1..=max_iter {
        let mapped = riccati_map(a, g, q, &p)?;
        let next = if damping == 1.0 {
            mapped
        } else {
            &p.scale(1.0 - damping) + &mapped.scale(damping)
        };
        let step = densela::frobenius_norm(&(&next - &p));
        let size = densela::frobenius_norm(&next);
        if !size.is_finite() {
            break;
        }
        p = next;
        let residual = inverse_form_residual(a, g, q, &p)?;
        if step <= STEP_RTOL * size || residual <= RESIDUAL_TOL * 1e-3 {
            return Ok((p, it));
        }
        if residual > last_residual * 1.5 {
            damping *= 0.5;
        }
        last_residual = residual;
    }
    Err(Error::NoConvergence {
        what: "Riccati fixed-point iteration",
        iterations: max_iter,
    })
}
