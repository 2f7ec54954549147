//! The joint objective `Ω(s, k) = ρ(s, k) + λ Ψ(s) + ι_{s ≥ 0} + ι_{k ∈ simplex}`.

use crate::error::Result;
use crate::fidelity::{grad_rho_s, rho, HighPass};
use crate::norms::{grad_psi, psi, SpoqParams};
use crate::scalar::Scalar;

/// Smooth part `f = ρ + λΨ`.
pub fn smooth_value<T: Scalar, H: HighPass<T> + ?Sized>(
    s: &[T],
    k: &[T],
    y: &[T],
    h: &H,
    prm: &SpoqParams<T>,
) -> Result<T> {
    Ok(rho(s, k, y, h)? + prm.lambda * psi(s, prm))
}

/// `∇₁f = ∇_s ρ + λ ∇Ψ`.
pub fn smooth_grad_s<T: Scalar, H: HighPass<T> + ?Sized>(
    s: &[T],
    k: &[T],
    y: &[T],
    h: &H,
    prm: &SpoqParams<T>,
) -> Result<Vec<T>> {
    let mut g = grad_rho_s(s, k, y, h)?;
    for (gi, pi) in g.iter_mut().zip(grad_psi(s, prm)) {
        *gi = *gi + prm.lambda * pi;
    }
    Ok(g)
}

fn on_simplex<T: Scalar>(k: &[T]) -> bool {
    let sum: T = k.iter().copied().sum();
    k.iter().all(|&v| v >= T::zero()) && (sum - T::one()).abs() <= T::simplex_tolerance(k.len())
}

/// Full objective; `+∞` outside the constraint sets.
pub fn objective<T: Scalar, H: HighPass<T> + ?Sized>(
    s: &[T],
    k: &[T],
    y: &[T],
    h: &H,
    prm: &SpoqParams<T>,
) -> Result<T> {
    if s.iter().any(|&v| v < T::zero()) || !on_simplex(k) {
        return Ok(T::infinity());
    }
    smooth_value(s, k, y, h, prm)
}
