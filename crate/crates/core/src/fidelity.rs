//! High-pass filtered quadratic data fidelity and its block Lipschitz
//! constants.
//!
//! `rho(s, k) = 0.5 * || H (y - k * s) ||^2`, where `H` removes the slowly
//! varying trend band. The trend itself is recovered afterwards through the
//! complementary low-pass `Id - H`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::{dot, norm2, Scalar};
use crate::signal::{adjoint_convolve_wrt_k, adjoint_convolve_wrt_s, convolve_same};

/// Linear trend-rejecting filter acting on length-`len()` signals.
pub trait HighPass<T: Scalar> {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn apply(&self, x: &[T]) -> Result<Vec<T>>;

    fn apply_adjoint(&self, x: &[T]) -> Result<Vec<T>>;

    /// `H^T H x`.
    fn apply_normal(&self, x: &[T]) -> Result<Vec<T>> {
        self.apply_adjoint(&self.apply(x)?)
    }

    /// `(Id - H) x`.
    fn apply_lowpass_complement(&self, x: &[T]) -> Result<Vec<T>> {
        let hx = self.apply(x)?;
        Ok(x.iter().zip(&hx).map(|(&a, &b)| a - b).collect())
    }
}

/// Ideal zero-phase DFT-domain high-pass: zeroes every bin `k` with
/// `min(k, N - k) < cutoff` and keeps the rest.
///
/// It is an orthogonal projector, so `H^T = H` and `H^T H = H`.
#[derive(Clone)]
pub struct HighPassOperator<T: Scalar> {
    len: usize,
    cutoff: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Scalar> fmt::Debug for HighPassOperator<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HighPassOperator")
            .field("len", &self.len)
            .field("cutoff", &self.cutoff)
            .finish()
    }
}

impl<T: Scalar> HighPassOperator<T> {
    pub fn new(len: usize, cutoff: usize) -> Result<Self> {
        if len < 2 || cutoff < 1 || cutoff > len / 2 {
            return Err(Error::InvalidParameter(format!(
                "cutoff bin {cutoff} must lie in [1, {}] for length {len}",
                len / 2
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            len,
            cutoff,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    fn filter(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.len {
            return Err(Error::Dimension(format!(
                "high-pass built for length {}, got {}",
                self.len,
                x.len()
            )));
        }
        let n = self.len;
        let mut buf: Vec<Complex<T>> = x.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.forward.process(&mut buf);
        for (k, c) in buf.iter_mut().enumerate() {
            if k.min(n - k) < self.cutoff {
                *c = Complex::new(T::zero(), T::zero());
            }
        }
        self.inverse.process(&mut buf);
        let scale = T::one() / T::of_usize(n);
        Ok(buf.into_iter().map(|c| c.re * scale).collect())
    }
}

impl<T: Scalar> HighPass<T> for HighPassOperator<T> {
    fn len(&self) -> usize {
        self.len
    }

    fn apply(&self, x: &[T]) -> Result<Vec<T>> {
        self.filter(x)
    }

    fn apply_adjoint(&self, x: &[T]) -> Result<Vec<T>> {
        self.filter(x)
    }

    fn apply_normal(&self, x: &[T]) -> Result<Vec<T>> {
        self.filter(x)
    }

    fn apply_lowpass_complement(&self, x: &[T]) -> Result<Vec<T>> {
        // x - Hx exactly, so the two parts always add back to x
        let hx = self.filter(x)?;
        Ok(x.iter().zip(&hx).map(|(&a, &b)| a - b).collect())
    }
}

fn residual<T: Scalar>(s: &[T], k: &[T], y: &[T]) -> Result<Vec<T>> {
    if y.len() != s.len() {
        return Err(Error::Dimension(format!(
            "observation length {} differs from signal length {}",
            y.len(),
            s.len()
        )));
    }
    let ks = convolve_same(s, k)?;
    Ok(y.iter().zip(&ks).map(|(&a, &b)| a - b).collect())
}

pub fn rho<T: Scalar, H: HighPass<T> + ?Sized>(s: &[T], k: &[T], y: &[T], h: &H) -> Result<T> {
    let hr = h.apply(&residual(s, k, y)?)?;
    Ok(T::lit(0.5) * dot(&hr, &hr))
}

/// Gradient of `rho` in the signal block: `-Π^T H^T H (y - Π s)`.
pub fn grad_rho_s<T: Scalar, H: HighPass<T> + ?Sized>(
    s: &[T],
    k: &[T],
    y: &[T],
    h: &H,
) -> Result<Vec<T>> {
    let g = h.apply_normal(&residual(s, k, y)?)?;
    Ok(adjoint_convolve_wrt_s(&g, k)?
        .into_iter()
        .map(|v| -v)
        .collect())
}

/// Gradient of `rho` in the kernel block.
pub fn grad_rho_pi<T: Scalar, H: HighPass<T> + ?Sized>(
    s: &[T],
    k: &[T],
    y: &[T],
    h: &H,
) -> Result<Vec<T>> {
    let g = h.apply_normal(&residual(s, k, y)?)?;
    Ok(adjoint_convolve_wrt_k(&g, s, k.len())?
        .into_iter()
        .map(|v| -v)
        .collect())
}

/// Settings for the top-eigenvalue estimates behind the Lipschitz bounds.
#[derive(Debug, Clone, Copy)]
pub struct EigenSettings {
    /// Stop once the estimate changes by at most this fraction between steps.
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Multiplier applied to the converged eigenvalue.
    pub safety: f64,
}

impl Default for EigenSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            max_iter: 500,
            safety: 1.01,
        }
    }
}

/// Floor returned when the operator is (numerically) zero.
pub const LIPSCHITZ_FLOOR: f64 = 1e-12;

const START_SEED: u64 = 0x9e37_79b9;
const START_JITTER: f64 = 0.1;

/// Deterministic start vector: all ones plus a small seeded perturbation.
pub fn default_start<T: Scalar>(len: usize) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    (0..len)
        .map(|_| T::lit(1.0 + START_JITTER * (rng.random::<f64>() - 0.5)))
        .collect()
}

/// Largest eigenvalue of the symmetric tridiagonal matrix with diagonal
/// `diag` and off-diagonal `off`, by Sturm-sequence bisection.
fn tridiag_top_eigenvalue(diag: &[f64], off: &[f64]) -> f64 {
    let n = diag.len();
    let radius = |i: usize| {
        let left = if i > 0 { off[i - 1].abs() } else { 0.0 };
        let right = if i + 1 < n { off[i].abs() } else { 0.0 };
        left + right
    };
    let mut lo = (0..n)
        .map(|i| diag[i] - radius(i))
        .fold(f64::INFINITY, f64::min);
    let mut hi = (0..n)
        .map(|i| diag[i] + radius(i))
        .fold(f64::NEG_INFINITY, f64::max);
    // number of eigenvalues strictly below x
    let below = |x: f64| {
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..n {
            let coupling = if i > 0 {
                off[i - 1] * off[i - 1] / q
            } else {
                0.0
            };
            q = diag[i] - x - coupling;
            if q == 0.0 {
                q = -f64::EPSILON * (x.abs() + f64::MIN_POSITIVE);
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if below(mid) == n {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Solves a tridiagonal system with partial pivoting; zero pivots are
/// replaced by a tiny value, which is what inverse iteration wants.
fn tridiag_solve(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let mut dl = sub.to_vec();
    let mut d = diag.to_vec();
    let mut du = sup.to_vec();
    let tiny = f64::EPSILON * d.iter().fold(f64::MIN_POSITIVE, |m, v| m.max(v.abs()));
    for i in 0..n.saturating_sub(1) {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == 0.0 {
                d[i] = tiny;
            }
            let fact = dl[i] / d[i];
            d[i + 1] -= fact * du[i];
            rhs[i + 1] -= fact * rhs[i];
            dl[i] = 0.0;
        } else {
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            let temp = d[i + 1];
            d[i + 1] = du[i] - fact * temp;
            if i + 2 < n {
                dl[i] = du[i + 1];
                du[i + 1] = -fact * dl[i];
            } else {
                dl[i] = 0.0;
            }
            du[i] = temp;
            let temp = rhs[i];
            rhs[i] = rhs[i + 1];
            rhs[i + 1] = temp - fact * rhs[i + 1];
        }
    }
    for i in (0..n).rev() {
        if d[i] == 0.0 {
            d[i] = tiny;
        }
        let mut acc = rhs[i];
        if i + 1 < n {
            acc -= du[i] * rhs[i + 1];
        }
        if i + 2 < n {
            acc -= dl[i] * rhs[i + 2];
        }
        rhs[i] = acc / d[i];
    }
}

/// Unit eigenvector of the tridiagonal matrix for eigenvalue `theta`.
fn tridiag_eigenvector(diag: &[f64], off: &[f64], theta: f64) -> Vec<f64> {
    let n = diag.len();
    let shift = theta + 1e-10 * (1.0 + theta.abs());
    let shifted: Vec<f64> = diag.iter().map(|d| d - shift).collect();
    let mut x = vec![1.0; n];
    for _ in 0..3 {
        tridiag_solve(off, &shifted, off, &mut x);
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v /= nx);
    }
    x
}

/// Largest eigenvalue of a symmetric positive semidefinite operator, by
/// Lanczos iteration with full reorthogonalization.
///
/// Returns the un-inflated estimate and the matching unit vector, which
/// callers can pass back in as a warm start. The estimate never exceeds
/// the true eigenvalue.
pub fn top_eigenpair<T: Scalar>(
    mut op: impl FnMut(&[T]) -> Result<Vec<T>>,
    start: Vec<T>,
    rel_tol: f64,
    max_iter: usize,
) -> Result<(T, Vec<T>)> {
    let n = start.len();
    let ns = norm2(&start);
    if !(ns > T::zero()) {
        return Ok((T::zero(), start));
    }
    let mut basis: Vec<Vec<T>> = vec![start.into_iter().map(|x| x / ns).collect()];
    let mut diag: Vec<f64> = Vec::new();
    let mut off: Vec<f64> = Vec::new();
    let mut previous: Option<f64> = None;
    for _ in 0..max_iter {
        let j = basis.len() - 1;
        let mut w = op(&basis[j])?;
        let a = dot(&basis[j], &w);
        diag.push(a.as_f64());
        // two Gram-Schmidt passes keep the basis orthogonal to working precision
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                w.iter_mut().zip(q).for_each(|(x, &qi)| *x = *x - c * qi);
            }
        }
        let theta = tridiag_top_eigenvalue(&diag, &off);
        let b = norm2(&w).as_f64();
        let exhausted = basis.len() == n || b <= 1e-12 * theta.abs().max(f64::MIN_POSITIVE);
        let settled = previous.is_some_and(|p| (theta - p).abs() <= rel_tol * theta.abs());
        if exhausted || settled {
            if !(theta > 0.0) {
                return Ok((T::zero(), basis.swap_remove(0)));
            }
            let coeffs = tridiag_eigenvector(&diag, &off, theta);
            let mut v = vec![T::zero(); n];
            for (q, &c) in basis.iter().zip(&coeffs) {
                let c = T::lit(c);
                v.iter_mut().zip(q).for_each(|(x, &qi)| *x = *x + c * qi);
            }
            let nv = norm2(&v);
            v.iter_mut().for_each(|x| *x = *x / nv);
            return Ok((T::lit(theta), v));
        }
        previous = Some(theta);
        off.push(b);
        let inv = T::lit(1.0 / b);
        basis.push(w.into_iter().map(|x| x * inv).collect());
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        estimate: previous.unwrap_or(0.0),
    })
}

fn inflate<T: Scalar>(eig: T, cfg: &EigenSettings) -> T {
    (eig * T::lit(cfg.safety)).max(T::lit(LIPSCHITZ_FLOOR))
}

/// Λ₁(k): Lipschitz bound of `grad_rho_s`, with an optional warm start.
///
/// Returns the bound and the dominant vector.
pub fn lipschitz_s_with<T: Scalar, H: HighPass<T> + ?Sized>(
    k: &[T],
    h: &H,
    start: Option<Vec<T>>,
    cfg: &EigenSettings,
) -> Result<(T, Vec<T>)> {
    let start = start.unwrap_or_else(|| default_start(h.len()));
    let op = |x: &[T]| {
        let kx = convolve_same(x, k)?;
        adjoint_convolve_wrt_s(&h.apply_normal(&kx)?, k)
    };
    let (eig, v) = top_eigenpair(op, start, cfg.rel_tol, cfg.max_iter)?;
    Ok((inflate(eig, cfg), v))
}

pub fn lipschitz_s<T: Scalar, H: HighPass<T> + ?Sized>(k: &[T], h: &H) -> Result<T> {
    Ok(lipschitz_s_with(k, h, None, &EigenSettings::default())?.0)
}

/// Λ₂(s): Lipschitz bound of `grad_rho_pi` for kernels of length `len`.
pub fn lipschitz_pi_with<T: Scalar, H: HighPass<T> + ?Sized>(
    s: &[T],
    len: usize,
    h: &H,
    start: Option<Vec<T>>,
    cfg: &EigenSettings,
) -> Result<(T, Vec<T>)> {
    let start = start.unwrap_or_else(|| default_start(len));
    if s.iter().all(|&v| v == T::zero()) {
        return Ok((T::lit(LIPSCHITZ_FLOOR), start));
    }
    let op = |x: &[T]| {
        let sx = convolve_same(s, x)?;
        adjoint_convolve_wrt_k(&h.apply_normal(&sx)?, s, len)
    };
    let (eig, v) = top_eigenpair(op, start, cfg.rel_tol, cfg.max_iter)?;
    Ok((inflate(eig, cfg), v))
}

pub fn lipschitz_pi<T: Scalar, H: HighPass<T> + ?Sized>(s: &[T], len: usize, h: &H) -> Result<T> {
    Ok(lipschitz_pi_with(s, len, h, None, &EigenSettings::default())?.0)
}
