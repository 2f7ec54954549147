//! Helpers shared by the integration tests.
#![allow(dead_code)]

use pendantss::signal::Kernel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Nonnegative vector where roughly `density` of the entries are nonzero.
pub fn sparse_nonneg(rng: &mut ChaCha8Rng, n: usize, density: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            if rng.random::<f64>() < density {
                rng.random_range(0.1..5.0)
            } else {
                0.0
            }
        })
        .collect()
}

pub fn random_kernel(rng: &mut ChaCha8Rng, len: usize) -> Kernel<f64> {
    Kernel::normalized(uniform(rng, len, 0.0, 1.0)).unwrap()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean projection onto the probability simplex by enumerating every
/// candidate support: on support `S` the KKT system gives
/// `x_S = v_S - (sum v_S - 1) / |S|`; the closest feasible candidate wins.
pub fn simplex_projection_oracle(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << n) {
        let members: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        let tau = (members.iter().map(|&i| v[i]).sum::<f64>() - 1.0) / members.len() as f64;
        let mut x = vec![0.0; n];
        let mut feasible = true;
        for &i in &members {
            x[i] = v[i] - tau;
            if x[i] < -1e-15 {
                feasible = false;
            }
        }
        if !feasible {
            continue;
        }
        let d = dist(&x, v);
        if best.as_ref().is_none_or(|(b, _)| d < *b) {
            best = Some((d, x));
        }
    }
    best.expect("some support is always feasible").1
}

/// Central finite-difference gradient.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], rel_step: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = rel_step * (1.0 + x[i].abs());
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let dn = f(&probe);
            probe[i] = x[i];
            (up - dn) / (2.0 * h)
        })
        .collect()
}

/// `||a - b|| / ||b||`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let nb = dot(b, b).sqrt();
    dist(a, b) / nb.max(f64::MIN_POSITIVE)
}
