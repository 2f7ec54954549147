//! Euclidean projections onto the nonnegative orthant and the unit simplex.

use crate::scalar::Scalar;

pub fn project_nonneg<T: Scalar>(v: &[T]) -> Vec<T> {
    v.iter().map(|&x| x.max(T::zero())).collect()
}

/// Projection onto `{x >= 0, sum x = 1}` by the sort-and-threshold method.
///
/// Coordinates are shifted by the threshold `tau` and clipped at zero; `tau`
/// is the largest value for which the clipped vector still sums to one.
pub fn project_simplex<T: Scalar>(v: &[T]) -> Vec<T> {
    if v.is_empty() {
        return Vec::new();
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cumsum = T::zero();
    let mut tau = T::zero();
    for (j, &u) in sorted.iter().enumerate() {
        cumsum = cumsum + u;
        let candidate = (cumsum - T::one()) / T::of_usize(j + 1);
        if u > candidate {
            tau = candidate;
        } else {
            break;
        }
    }
    let mut out: Vec<T> = v.iter().map(|&x| (x - tau).max(T::zero())).collect();
    // one renormalization pass absorbs the rounding of the cumulative sum
    let sum: T = out.iter().copied().sum();
    if sum > T::zero() {
        out.iter_mut().for_each(|x| *x = *x / sum);
    }
    out
}
