//! Diagonal majorize-minimize metric for the signal block.
//!
//! On the ℓq-ball complement `{s : sum |s_n|^q >= r}` the objective in `s` is
//! majorized by the quadratic
//!
//! ```text
//! f(s_k, k) + <s - s_k, ∇₁f(s_k, k)> + 0.5 * ||s - s_k||_A^2
//! ```
//!
//! with `A = (Λ₁ + λχ) Id + λ / (lp^p + β^p) Diag((s_{k,n}^2 + α^2)^(p/2 - 1))`.
//!
//! Radii are always in the q-th-power domain: `r` stands for `ρ^q`.

use std::ops::Deref;

use crate::error::{Error, Result};
use crate::fidelity::HighPass;
use crate::norms::{lp_alpha_pow, lq_sum, SpoqParams};
use crate::objective::{smooth_grad_s, smooth_value};
use crate::scalar::Scalar;

/// Positive diagonal of the MM metric.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricDiag<T>(Vec<T>);

impl<T: Scalar> MetricDiag<T> {
    pub fn new(diag: Vec<T>) -> Result<Self> {
        if let Some(i) = diag
            .iter()
            .position(|&d| !(d > T::zero()) || !d.is_finite())
        {
            return Err(Error::InvalidParameter(format!(
                "metric entry {i} is not strictly positive"
            )));
        }
        Ok(Self(diag))
    }

    /// `0.5 * sum_n d_n z_n^2`.
    pub fn half_sq_norm(&self, z: &[T]) -> T {
        T::lit(0.5) * self.0.iter().zip(z).map(|(&d, &x)| d * x * x).sum::<T>()
    }
}

impl<T> Deref for MetricDiag<T> {
    type Target = [T];

    fn deref(&self) -> &[T] {
        &self.0
    }
}

/// `χ = (q - 1) / (η^q + r)^(2/q)` for a power-domain radius `r = ρ^q`.
pub fn chi<T: Scalar>(q: T, eta: T, radius_pow: T) -> T {
    (q - T::one()) / (eta.powf(q) + radius_pow).powf(T::lit(2.0) / q)
}

pub fn metric_diag<T: Scalar>(
    s_k: &[T],
    lipschitz: T,
    prm: &SpoqParams<T>,
    radius_pow: T,
) -> MetricDiag<T> {
    let two = T::lit(2.0);
    let base = lipschitz + prm.lambda * chi(prm.q, prm.eta, radius_pow);
    let weight =
        prm.lambda / (lp_alpha_pow(s_k, prm.p, prm.alpha).max(T::zero()) + prm.beta.powf(prm.p));
    let a2 = prm.alpha * prm.alpha;
    let exponent = prm.p / two - T::one();
    // alpha > 0 caps (s^2 + alpha^2)^(p/2 - 1) at alpha^(p - 2) near zero
    MetricDiag(
        s_k.iter()
            .map(|&x| base + weight * (x * x + a2).powf(exponent))
            .collect(),
    )
}

/// True iff `sum_n |s_n|^q >= r`.
pub fn in_ball_complement<T: Scalar>(s: &[T], q: T, radius_pow: T) -> bool {
    lq_sum(s, q) >= radius_pow
}

/// Value of the quadratic majorant at `s`, built around `(s_k, k)`.
#[allow(clippy::too_many_arguments)]
pub fn majorant_value<T: Scalar, H: HighPass<T> + ?Sized>(
    s: &[T],
    s_k: &[T],
    k: &[T],
    y: &[T],
    h: &H,
    prm: &SpoqParams<T>,
    metric: &MetricDiag<T>,
) -> Result<T> {
    if s.len() != s_k.len() || metric.len() != s.len() {
        return Err(Error::Dimension(
            "majorant arguments differ in length".into(),
        ));
    }
    let f_k = smooth_value(s_k, k, y, h, prm)?;
    let g = smooth_grad_s(s_k, k, y, h, prm)?;
    let d: Vec<T> = s.iter().zip(s_k).map(|(&a, &b)| a - b).collect();
    let linear: T = d.iter().zip(&g).map(|(&a, &b)| a * b).sum();
    Ok(f_k + linear + metric.half_sq_norm(&d))
}
