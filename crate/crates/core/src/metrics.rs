//! Reconstruction quality in decibels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{norm2, Scalar};
use crate::signal::{shift_kernel, Kernel};

/// Reported value for an exact reconstruction, and the ceiling for all others.
pub const SNR_CAP_DB: f64 = 300.0;

/// Scores of one decomposition against ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub snr_s: f64,
    pub tsnr_s: f64,
    pub snr_t: f64,
    pub snr_pi: f64,
    pub composite: f64,
}

impl MetricsReport {
    pub fn new(snr_s: f64, tsnr_s: f64, snr_t: f64, snr_pi: f64) -> Self {
        Self {
            snr_s,
            tsnr_s,
            snr_t,
            snr_pi,
            composite: composite(snr_s, snr_pi, snr_t),
        }
    }
}

/// `20 log10(||ref|| / ||ref - est||)`, capped at [`SNR_CAP_DB`].
pub fn snr<T: Scalar>(reference: &[T], estimate: &[T]) -> Result<f64> {
    if reference.len() != estimate.len() {
        return Err(Error::Dimension(format!(
            "reference has {} samples, estimate {}",
            reference.len(),
            estimate.len()
        )));
    }
    let r = norm2(reference).as_f64();
    if !(r > 0.0) {
        return Err(Error::ZeroReference);
    }
    let err: Vec<T> = reference
        .iter()
        .zip(estimate)
        .map(|(&a, &b)| a - b)
        .collect();
    let e = norm2(&err).as_f64();
    if e == 0.0 {
        return Ok(SNR_CAP_DB);
    }
    Ok((20.0 * (r / e).log10()).min(SNR_CAP_DB))
}

/// SNR restricted to the given support indices.
pub fn tsnr<T: Scalar>(reference: &[T], estimate: &[T], support: &[usize]) -> Result<f64> {
    if support.is_empty() {
        return Err(Error::EmptySupport);
    }
    if reference.len() != estimate.len() {
        return Err(Error::Dimension(
            "reference and estimate differ in length".into(),
        ));
    }
    if let Some(&bad) = support.iter().find(|&&i| i >= reference.len()) {
        return Err(Error::Dimension(format!(
            "support index {bad} out of range"
        )));
    }
    let r: Vec<T> = support.iter().map(|&i| reference[i]).collect();
    let e: Vec<T> = support.iter().map(|&i| estimate[i]).collect();
    snr(&r, &e)
}

/// Best kernel SNR over integer shifts `d ∈ [-max_shift, max_shift]` of the
/// estimate. Ties go to the smallest `|d|`, then to the negative shift.
pub fn kernel_snr_aligned<T: Scalar>(
    reference: &Kernel<T>,
    estimate: &Kernel<T>,
    max_shift: usize,
) -> Result<(f64, isize)> {
    if reference.len() != estimate.len() {
        return Err(Error::Dimension("kernels differ in length".into()));
    }
    if max_shift >= reference.len() {
        return Err(Error::InvalidParameter(format!(
            "max_shift {max_shift} must be below the kernel length {}",
            reference.len()
        )));
    }
    let mut best: Option<(f64, isize)> = None;
    let m = max_shift as isize;
    // visiting 0, -1, 1, -2, 2, ... and keeping strict improvements only
    // implements the tie-break
    let order = std::iter::once(0).chain((1..=m).flat_map(|d| [-d, d]));
    for d in order {
        let shifted = match shift_kernel(estimate, d) {
            Ok(k) => k,
            Err(Error::DegenerateShift(_)) => continue,
            Err(e) => return Err(e),
        };
        let v = snr(reference, &shifted)?;
        if best.is_none_or(|(b, _)| v > b) {
            best = Some((v, d));
        }
    }
    best.ok_or(Error::AllCandidatesFailed(
        "no shift keeps kernel mass".into(),
    ))
}

/// Tuning criterion `2 SNR_s + SNR_π + SNR_t`.
pub fn composite(snr_s: f64, snr_pi: f64, snr_t: f64) -> f64 {
    2.0 * snr_s + snr_pi + snr_t
}

/// Indices of the nonzero entries of a ground-truth spike train.
pub fn support_of<T: Scalar>(s: &[T]) -> Vec<usize> {
    s.iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > T::zero())
        .map(|(i, _)| i)
        .collect()
}
