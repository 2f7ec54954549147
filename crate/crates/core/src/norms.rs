//! Smoothed ℓp / ℓq norms and the log-ratio sparsity penalty built from them.
//!
//! ```text
//! lp_alpha(s) = ( sum_n (s_n^2 + alpha^2)^(p/2) - alpha^p )^(1/p)
//! lq_eta(s)   = ( eta^q + sum_n |s_n|^q )^(1/q)
//! psi(s)      = log( (lp_alpha(s)^p + beta^p)^(1/p) / lq_eta(s) )
//! ```
//!
//! `(p, q) = (1, 2)` gives the smoothed ℓ1/ℓ2 ratio.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{abs_pow, sign, Scalar};

/// Penalty configuration: exponents, smoothing constants and weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpoqParams<T> {
    pub p: T,
    pub q: T,
    pub alpha: T,
    pub beta: T,
    pub eta: T,
    pub lambda: T,
}

impl<T: Scalar> SpoqParams<T> {
    /// Checks ranges and the differentiability condition
    /// `q > 2` or `eta^2 * alpha^(p-2) > beta^p`.
    pub fn validate(&self) -> Result<()> {
        let zero = T::zero();
        let two = T::lit(2.0);
        let fail = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.p > zero && self.p < two) {
            return fail(format!("p = {} must lie in (0, 2)", self.p));
        }
        if !(self.q >= two) || !self.q.is_finite() {
            return fail(format!("q = {} must be finite and at least 2", self.q));
        }
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("eta", self.eta),
            ("lambda", self.lambda),
        ] {
            if !(v > zero) || !v.is_finite() {
                return fail(format!("{name} = {v} must be positive and finite"));
            }
        }
        if self.q == two {
            let lhs = self.eta * self.eta * self.alpha.powf(self.p - two);
            let rhs = self.beta.powf(self.p);
            if !(lhs > rhs) {
                return fail(format!(
                    "q = 2 requires eta^2 * alpha^(p-2) > beta^p, got {lhs:e} <= {rhs:e}"
                ));
            }
        }
        Ok(())
    }
}

impl SpoqParams<f64> {
    /// Smoothed ℓ1/ℓ2 configuration with the constants used throughout the
    /// benchmarks.
    pub fn soot(lambda: f64) -> Self {
        Self {
            p: 1.0,
            q: 2.0,
            alpha: 7e-7,
            beta: 3e-3,
            eta: 1e-1,
            lambda,
        }
    }
}

/// `lp_alpha(s)^p`, the form every other routine actually needs.
pub fn lp_alpha_pow<T: Scalar>(s: &[T], p: T, alpha: T) -> T {
    let two = T::lit(2.0);
    let alpha_p = alpha.powf(p);
    let a2 = alpha * alpha;
    s.iter()
        .map(|&x| (x * x + a2).powf(p / two) - alpha_p)
        .sum()
}

/// Sum of `|s_n|^q`.
pub fn lq_sum<T: Scalar>(s: &[T], q: T) -> T {
    s.iter().map(|&x| abs_pow(x, q)).sum()
}

pub fn lp_alpha<T: Scalar>(s: &[T], p: T, alpha: T) -> T {
    // rounding can push tiny sums a hair below zero
    lp_alpha_pow(s, p, alpha).max(T::zero()).powf(T::one() / p)
}

pub fn lq_eta<T: Scalar>(s: &[T], q: T, eta: T) -> T {
    (eta.powf(q) + lq_sum(s, q)).powf(T::one() / q)
}

/// The log-ratio penalty, evaluated in log form to avoid forming large powers
/// twice.
pub fn psi<T: Scalar>(s: &[T], prm: &SpoqParams<T>) -> T {
    let num =
        (lp_alpha_pow(s, prm.p, prm.alpha).max(T::zero()) + prm.beta.powf(prm.p)).ln() / prm.p;
    let den = (prm.eta.powf(prm.q) + lq_sum(s, prm.q)).ln() / prm.q;
    num - den
}

pub fn grad_psi<T: Scalar>(s: &[T], prm: &SpoqParams<T>) -> Vec<T> {
    let two = T::lit(2.0);
    let a2 = prm.alpha * prm.alpha;
    let lp_den = lp_alpha_pow(s, prm.p, prm.alpha).max(T::zero()) + prm.beta.powf(prm.p);
    let lq_den = prm.eta.powf(prm.q) + lq_sum(s, prm.q);
    let qm1 = prm.q - T::one();
    s.iter()
        .map(|&x| {
            let sparse = x * (x * x + a2).powf(prm.p / two - T::one()) / lp_den;
            let spread = sign(x) * abs_pow(x, qm1) / lq_den;
            sparse - spread
        })
        .collect()
}
