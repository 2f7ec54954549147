//! Signal and kernel types plus the zero-padded "same" convolution.
//!
//! All convolutions place the kernel center at tap `L / 2` (kernels have odd
//! length) and treat samples outside `0..N` as zero:
//!
//! ```text
//! out[n] = sum_l k[l] * s[n - l + L/2]
//! ```

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A finite, non-empty real sample vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Signal<T>(Vec<T>);

impl<T: Scalar> Signal<T> {
    pub fn new(samples: Vec<T>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidSignal(
                "signal must have at least one sample".into(),
            ));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSignal(format!("sample {i} is not finite")));
        }
        Ok(Self(samples))
    }

    pub fn zeros(len: usize) -> Result<Self> {
        Self::new(vec![T::zero(); len])
    }

    pub fn constant(len: usize, value: T) -> Result<Self> {
        Self::new(vec![value; len])
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

impl<T> Deref for Signal<T> {
    type Target = [T];

    fn deref(&self) -> &[T] {
        &self.0
    }
}

/// A nonnegative, unit-sum kernel of odd length (a point of the unit simplex).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Kernel<T>(Vec<T>);

impl<T: Scalar> Kernel<T> {
    pub fn new(taps: Vec<T>) -> Result<Self> {
        if taps.is_empty() || taps.len().is_multiple_of(2) {
            return Err(Error::InvalidKernel(format!(
                "kernel length must be odd and positive, got {}",
                taps.len()
            )));
        }
        if let Some(i) = taps.iter().position(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::InvalidKernel(format!(
                "tap {i} is negative or not finite"
            )));
        }
        let sum: T = taps.iter().copied().sum();
        if (sum - T::one()).abs() > T::simplex_tolerance(taps.len()) {
            return Err(Error::InvalidKernel(format!(
                "taps sum to {sum}, expected 1"
            )));
        }
        Ok(Self(taps))
    }

    /// Rescales nonnegative taps to unit sum.
    pub fn normalized(mut taps: Vec<T>) -> Result<Self> {
        let sum: T = taps.iter().copied().sum();
        if !(sum > T::zero()) || !sum.is_finite() {
            return Err(Error::InvalidKernel("taps have no positive mass".into()));
        }
        taps.iter_mut().for_each(|t| *t = *t / sum);
        Self::new(taps)
    }

    /// Unit impulse at the center tap.
    pub fn delta(len: usize) -> Result<Self> {
        let mut taps = vec![T::zero(); len.max(1)];
        taps[len / 2] = T::one();
        Self::new(taps)
    }

    /// Sampled Gaussian with standard deviation given in samples, centered
    /// at tap `len / 2`.
    pub fn gaussian(len: usize, std_samples: T) -> Result<Self> {
        if !(std_samples > T::zero()) {
            return Err(Error::InvalidParameter(
                "Gaussian width must be positive".into(),
            ));
        }
        let c = T::of_usize(len / 2);
        let two = T::lit(2.0);
        let taps = (0..len)
            .map(|l| {
                let x = T::of_usize(l) - c;
                (-(x * x) / (two * std_samples * std_samples)).exp()
            })
            .collect();
        Self::normalized(taps)
    }

    pub fn center(&self) -> usize {
        self.0.len() / 2
    }

    /// Index of the largest tap (first one on ties).
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

impl<T> Deref for Kernel<T> {
    type Target = [T];

    fn deref(&self) -> &[T] {
        &self.0
    }
}

pub(crate) fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn check_dims(n: usize, l: usize) -> Result<()> {
    if l == 0 || l.is_multiple_of(2) {
        return Err(Error::Dimension(format!("kernel length {l} must be odd")));
    }
    if l > n {
        return Err(Error::Dimension(format!(
            "kernel length {l} exceeds signal length {n}"
        )));
    }
    Ok(())
}

/// Zero-padded linear convolution cropped to `s.len()` samples, kernel
/// centered at tap `k.len() / 2`.
pub fn convolve_same<T: Scalar>(s: &[T], k: &[T]) -> Result<Vec<T>> {
    let (n, l) = (s.len(), k.len());
    check_dims(n, l)?;
    let c = l / 2;
    let mut out = vec![T::zero(); n];
    for (i, o) in out.iter_mut().enumerate() {
        // s index j = i + c - l must lie in 0..n
        let lo = (i + c + 1).saturating_sub(n);
        let hi = (i + c).min(l - 1);
        let mut acc = T::zero();
        for t in lo..=hi {
            acc = acc + k[t] * s[i + c - t];
        }
        *o = acc;
    }
    Ok(out)
}

/// Adjoint of `s -> convolve_same(s, k)` applied to `r`.
pub fn adjoint_convolve_wrt_s<T: Scalar>(r: &[T], k: &[T]) -> Result<Vec<T>> {
    let (n, l) = (r.len(), k.len());
    check_dims(n, l)?;
    let c = l / 2;
    let mut out = vec![T::zero(); n];
    for (m, o) in out.iter_mut().enumerate() {
        // r index i = m + t - c must lie in 0..n
        let lo = c.saturating_sub(m);
        let hi = (n - 1 + c - m).min(l - 1);
        let mut acc = T::zero();
        for t in lo..=hi {
            acc = acc + k[t] * r[m + t - c];
        }
        *o = acc;
    }
    Ok(out)
}

/// Adjoint of `k -> convolve_same(s, k)` applied to `r`, for kernels of
/// length `len`.
pub fn adjoint_convolve_wrt_k<T: Scalar>(r: &[T], s: &[T], len: usize) -> Result<Vec<T>> {
    let n = s.len();
    if r.len() != n {
        return Err(Error::Dimension(format!(
            "residual length {} differs from signal length {n}",
            r.len()
        )));
    }
    check_dims(n, len)?;
    let c = len / 2;
    let out = (0..len)
        .map(|t| {
            // pairs (i, j = i + c - t) with both in 0..n
            let lo = t.saturating_sub(c);
            let hi = (n + t).saturating_sub(c + 1).min(n - 1);
            (lo..=hi).map(|i| r[i] * s[i + c - t]).sum()
        })
        .collect();
    Ok(out)
}

/// Translates `v` by `d` samples (`out[i] = v[i - d]`), zero-filling.
pub fn shift_zero_fill<T: Scalar>(v: &[T], d: isize) -> Vec<T> {
    let n = v.len() as isize;
    (0..n)
        .map(|i| {
            let j = i - d;
            if (0..n).contains(&j) {
                v[j as usize]
            } else {
                T::zero()
            }
        })
        .collect()
}

/// Translates kernel taps by `d`, zero-fills, and renormalizes to unit sum.
pub fn shift_kernel<T: Scalar>(k: &Kernel<T>, d: isize) -> Result<Kernel<T>> {
    let l = k.len() as isize;
    if d.abs() >= l {
        return Err(Error::InvalidParameter(format!(
            "shift {d} out of range for kernel of length {l}"
        )));
    }
    if d == 0 {
        return Ok(k.clone());
    }
    let taps = shift_zero_fill(k, d);
    let mass: T = taps.iter().copied().sum();
    if mass < T::lit(1e-14) {
        return Err(Error::DegenerateShift(d));
    }
    Kernel::normalized(taps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_convolve(s: &[f64], k: &[f64]) -> Vec<f64> {
        let n = s.len() as isize;
        let c = (k.len() / 2) as isize;
        (0..n)
            .map(|i| {
                let mut acc = 0.0;
                for (l, &kl) in k.iter().enumerate() {
                    let j = i - l as isize + c;
                    if j >= 0 && j < n {
                        acc += kl * s[j as usize];
                    }
                }
                acc
            })
            .collect()
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn random_kernel(rng: &mut ChaCha8Rng, l: usize) -> Kernel<f64> {
        Kernel::normalized((0..l).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn impulse_reproduces_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let k = random_kernel(&mut rng, 21);
        let mut s = vec![0.0; 21];
        s[10] = 1.0;
        let out = convolve_same(&s, &k).unwrap();
        for (o, t) in out.iter().zip(k.iter()) {
            assert_abs_diff_eq!(o, t, epsilon = 1e-15);
        }
    }

    #[test]
    fn uniform_kernel_preserves_constants_inside() {
        let s = vec![1.0; 50];
        let k = vec![0.2; 5];
        let out = convolve_same(&s, &k).unwrap();
        for v in &out[2..48] {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-14);
        }
        assert!(out[0] < 1.0 && out[49] < 1.0);
    }

    #[test]
    fn matches_naive_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let s = random_vec(&mut rng, 30);
            let k = random_vec(&mut rng, 7);
            let fast = convolve_same(&s, &k).unwrap();
            let slow = naive_convolve(&s, &k);
            for (a, b) in fast.iter().zip(&slow) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
        // kernel as long as the signal
        let s = random_vec(&mut rng, 9);
        let k = random_vec(&mut rng, 9);
        let fast = convolve_same(&s, &k).unwrap();
        for (a, b) in fast.iter().zip(&naive_convolve(&s, &k)) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(matches!(
            convolve_same(&[1.0; 4], &[0.2; 5]),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            convolve_same(&[1.0; 8], &[0.5; 2]),
            Err(Error::Dimension(_))
        ));
        assert!(adjoint_convolve_wrt_s(&[1.0; 4], &[0.2; 5]).is_err());
        assert!(adjoint_convolve_wrt_k(&[1.0; 4], &[1.0; 4], 5).is_err());
        assert!(adjoint_convolve_wrt_k(&[1.0; 5], &[1.0; 4], 3).is_err());
    }

    #[test]
    fn linear_in_each_argument() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let (s1, s2) = (random_vec(&mut rng, 25), random_vec(&mut rng, 25));
            let (k1, k2) = (random_vec(&mut rng, 5), random_vec(&mut rng, 5));
            let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let mix_s: Vec<f64> = s1.iter().zip(&s2).map(|(x, y)| a * x + b * y).collect();
            let lhs = convolve_same(&mix_s, &k1).unwrap();
            let (c1, c2) = (
                convolve_same(&s1, &k1).unwrap(),
                convolve_same(&s2, &k1).unwrap(),
            );
            for i in 0..25 {
                assert_abs_diff_eq!(lhs[i], a * c1[i] + b * c2[i], epsilon = 1e-12);
            }
            let mix_k: Vec<f64> = k1.iter().zip(&k2).map(|(x, y)| a * x + b * y).collect();
            let lhs = convolve_same(&s1, &mix_k).unwrap();
            let c2 = convolve_same(&s1, &k2).unwrap();
            for i in 0..25 {
                assert_abs_diff_eq!(lhs[i], a * c1[i] + b * c2[i], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn adjoint_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let s = random_vec(&mut rng, 40);
            let r = random_vec(&mut rng, 40);
            let k = random_kernel(&mut rng, 9);
            let lhs: f64 = convolve_same(&s, &k)
                .unwrap()
                .iter()
                .zip(&r)
                .map(|(a, b)| a * b)
                .sum();
            let rhs_s: f64 = s
                .iter()
                .zip(&adjoint_convolve_wrt_s(&r, &k).unwrap())
                .map(|(a, b)| a * b)
                .sum();
            let rhs_k: f64 = k
                .iter()
                .zip(&adjoint_convolve_wrt_k(&r, &s, 9).unwrap())
                .map(|(a, b)| a * b)
                .sum();
            assert_abs_diff_eq!(lhs, rhs_s, epsilon = 1e-10);
            assert_abs_diff_eq!(lhs, rhs_k, epsilon = 1e-10);
        }
    }

    #[test]
    fn symmetric_kernel_is_self_adjoint_on_centered_impulse() {
        let k = Kernel::gaussian(7, 1.3).unwrap();
        let mut r = vec![0.0; 21];
        r[10] = 1.0;
        let a = adjoint_convolve_wrt_s(&r, &k).unwrap();
        let b = convolve_same(&r, &k).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-15);
        }
    }

    #[test]
    fn delta_kernel_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r = random_vec(&mut rng, 16);
        let k = Kernel::<f64>::delta(5).unwrap();
        assert_eq!(adjoint_convolve_wrt_s(&r, &k).unwrap(), r);
        assert_eq!(convolve_same(&r, &k).unwrap(), r);
    }

    #[test]
    fn kernel_adjoint_edge_cases() {
        let mut s = vec![0.0; 15];
        s[7] = 1.0;
        let out = adjoint_convolve_wrt_k(&s, &s, 5).unwrap();
        assert_eq!(out, vec![0.0, 0.0, 1.0, 0.0, 0.0]);
        let zero = adjoint_convolve_wrt_k(&[0.0; 15], &s, 5).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shift_kernel_moves_taps() {
        let k = Kernel::<f64>::gaussian(21, 2.0).unwrap();
        assert_eq!(shift_kernel(&k, 0).unwrap(), k);

        let mut taps = vec![0.0; 21];
        taps[8] = 1.0;
        let shifted = shift_kernel(&Kernel::new(taps).unwrap(), 2).unwrap();
        assert_eq!(shifted.argmax(), 10);
        assert_eq!(shifted[10], 1.0);
    }

    #[test]
    fn shift_kernel_recenters_offcenter_gaussian() {
        let taps: Vec<f64> = (0..21)
            .map(|l| (-((l as f64 - 6.0).powi(2)) / 4.0).exp())
            .collect();
        let k = Kernel::normalized(taps).unwrap();
        assert_eq!(k.argmax(), 6);
        let d = k.center() as isize - k.argmax() as isize;
        let centered = shift_kernel(&k, d).unwrap();
        assert_eq!(centered.argmax(), 10);
        let sum: f64 = centered.iter().sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn shift_kernel_losing_all_mass_errors() {
        let mut taps = vec![0.0; 5];
        taps[4] = 1.0;
        let k = Kernel::new(taps).unwrap();
        assert!(matches!(
            shift_kernel(&k, 2),
            Err(Error::DegenerateShift(2))
        ));
        assert!(shift_kernel(&k, 5).is_err());
    }

    #[test]
    fn type_invariants() {
        assert!(Signal::<f64>::new(vec![]).is_err());
        assert!(Signal::new(vec![1.0, f64::NAN]).is_err());
        assert!(Kernel::new(vec![0.5, 0.5]).is_err());
        assert!(Kernel::new(vec![0.5, 0.6, -0.1]).is_err());
        assert!(Kernel::new(vec![0.2, 0.2, 0.2]).is_err());
        assert!(Kernel::new(vec![0.25, 0.5, 0.25]).is_ok());
        let k32 = Kernel::<f32>::gaussian(21, 1.5).unwrap();
        assert_eq!(k32.argmax(), 10);
    }
}
