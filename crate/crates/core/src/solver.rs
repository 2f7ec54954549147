//! Trust-region block-coordinate variable-metric forward-backward solver.
//!
//! Each outer iteration
//!
//! 1. updates the spike train with a projected variable-metric step, trying a
//!    decreasing list of ℓq-ball radii until the candidate lands in the region
//!    where the MM majorant is valid;
//! 2. updates the kernel with a projected gradient step onto the simplex;
//! 3. stops once `||s_k - s_{k+1}|| <= epsilon` or after `k_max` iterations.
//!
//! The trend is then read off the residual with the low-pass complement, and
//! the integer shift ambiguity between spikes and kernel is removed by moving
//! the kernel peak to the center tap.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fidelity::{grad_rho_pi, lipschitz_pi_with, lipschitz_s_with, EigenSettings, HighPass};
use crate::metric::{in_ball_complement, metric_diag};
use crate::norms::{lq_sum, SpoqParams};
use crate::objective::{objective, smooth_grad_s};
use crate::projection::{project_nonneg, project_simplex};
use crate::scalar::{norm2, Scalar};
use crate::signal::{convolve_same, shift_kernel, shift_zero_fill, Kernel, Signal};

/// Smallest admissible distance of a step size from 0 and from 2.
pub const STEP_MARGIN: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Scalar"))]
pub struct SolverConfig<T> {
    pub gamma_s: T,
    pub gamma_pi: T,
    /// Radius decay between successive trust-region tests.
    pub theta: T,
    pub max_tr_tests: usize,
    /// Stopping tolerance on `||s_k - s_{k+1}||`; `None` means `1e-6 * sqrt(N)`.
    pub epsilon: Option<T>,
    pub k_max: usize,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            gamma_s: T::lit(1.9),
            gamma_pi: T::lit(1.9),
            theta: T::lit(0.5),
            max_tr_tests: 50,
            epsilon: None,
            k_max: 3000,
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let lo = T::lit(STEP_MARGIN);
        let hi = T::lit(2.0 - STEP_MARGIN);
        for (name, g) in [("gamma_s", self.gamma_s), ("gamma_pi", self.gamma_pi)] {
            if !(g >= lo && g <= hi) {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {g} must lie in [{STEP_MARGIN}, {}]",
                    2.0 - STEP_MARGIN
                )));
            }
        }
        if !(self.theta > T::zero() && self.theta < T::one()) {
            return Err(Error::InvalidParameter(format!(
                "theta = {} must lie in (0, 1)",
                self.theta
            )));
        }
        if self.max_tr_tests < 1 {
            return Err(Error::InvalidParameter(
                "max_tr_tests must be at least 1".into(),
            ));
        }
        if self.k_max < 1 {
            return Err(Error::InvalidParameter("k_max must be at least 1".into()));
        }
        if let Some(eps) = self.epsilon {
            if !(eps > T::zero()) {
                return Err(Error::InvalidParameter(format!(
                    "epsilon = {eps} must be positive"
                )));
            }
        }
        Ok(())
    }

    pub fn epsilon_for(&self, len: usize) -> T {
        self.epsilon
            .unwrap_or_else(|| T::lit(1e-6) * T::of_usize(len).sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tolerance,
    IterationCap,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Tolerance => "tolerance",
            StopReason::IterationCap => "iteration_cap",
        }
    }
}

/// Solver output: spike train, kernel and trend estimates plus diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct Decomposition<T> {
    pub s_hat: Signal<T>,
    pub pi_hat: Kernel<T>,
    pub t_hat: Signal<T>,
    pub iterations: usize,
    /// `Ω(s_k, π_k)` for `k = 0..=iterations`.
    pub objective_trace: Vec<T>,
    pub tr_tests_per_iter: Vec<usize>,
    pub stop_reason: StopReason,
    /// Shift applied to the spike train by the final recentering.
    pub recenter_shift: isize,
}

/// Trust-region radii in the q-th-power domain:
/// `r_1 = sum |s_n|^q`, `r_i = theta * r_{i-1}`, `r_I = 0`.
pub fn tr_radii<T: Scalar>(s_k: &[T], q: T, theta: T, count: usize) -> Vec<T> {
    let mut radii = Vec::with_capacity(count);
    if count == 0 {
        return radii;
    }
    let mut r = lq_sum(s_k, q);
    for _ in 0..count - 1 {
        radii.push(r);
        r = theta * r;
    }
    radii.push(T::zero());
    radii
}

/// Signal update for a known Λ₁(π_k). Returns the accepted iterate and the
/// number of trust-region tests it took.
#[allow(clippy::too_many_arguments)]
pub fn update_s_with<T: Scalar, H: HighPass<T> + ?Sized>(
    s_k: &[T],
    k: &[T],
    y: &[T],
    h: &H,
    prm: &SpoqParams<T>,
    cfg: &SolverConfig<T>,
    lipschitz: T,
) -> Result<(Vec<T>, usize)> {
    let grad = smooth_grad_s(s_k, k, y, h, prm)?;
    let radii = tr_radii(s_k, prm.q, cfg.theta, cfg.max_tr_tests);
    let mut candidate = Vec::new();
    for (i, &r) in radii.iter().enumerate() {
        let metric = metric_diag(s_k, lipschitz, prm, r);
        let step: Vec<T> = s_k
            .iter()
            .zip(&grad)
            .zip(metric.iter())
            .map(|((&s, &g), &a)| s - cfg.gamma_s * g / a)
            .collect();
        candidate = project_nonneg(&step);
        if in_ball_complement(&candidate, prm.q, r) {
            return Ok((candidate, i + 1));
        }
    }
    // unreachable: the last radius is zero and every vector passes it
    Ok((candidate, radii.len()))
}

pub fn update_s<T: Scalar, H: HighPass<T> + ?Sized>(
    s_k: &[T],
    k: &[T],
    y: &[T],
    h: &H,
    prm: &SpoqParams<T>,
    cfg: &SolverConfig<T>,
) -> Result<(Vec<T>, usize)> {
    let (l1, _) = lipschitz_s_with(k, h, None, &EigenSettings::default())?;
    update_s_with(s_k, k, y, h, prm, cfg, l1)
}

/// Kernel update for a known Λ₂(s_{k+1}).
pub fn update_pi_with<T: Scalar, H: HighPass<T> + ?Sized>(
    k: &[T],
    s_next: &[T],
    y: &[T],
    h: &H,
    cfg: &SolverConfig<T>,
    lipschitz: T,
) -> Result<Kernel<T>> {
    let grad = grad_rho_pi(s_next, k, y, h)?;
    let step: Vec<T> = k
        .iter()
        .zip(&grad)
        .map(|(&kv, &g)| kv - cfg.gamma_pi * g / lipschitz)
        .collect();
    Kernel::new(project_simplex(&step))
}

pub fn update_pi<T: Scalar, H: HighPass<T> + ?Sized>(
    k: &[T],
    s_next: &[T],
    y: &[T],
    h: &H,
    cfg: &SolverConfig<T>,
) -> Result<Kernel<T>> {
    let (l2, _) = lipschitz_pi_with(s_next, k.len(), h, None, &EigenSettings::default())?;
    update_pi_with(k, s_next, y, h, cfg, l2)
}

/// `(Id - H)(y - k * s)`.
pub fn estimate_trend<T: Scalar, H: HighPass<T> + ?Sized>(
    y: &[T],
    s: &[T],
    k: &[T],
    h: &H,
) -> Result<Vec<T>> {
    if y.len() != s.len() {
        return Err(Error::Dimension(format!(
            "observation length {} differs from signal length {}",
            y.len(),
            s.len()
        )));
    }
    let ks = convolve_same(s, k)?;
    let r: Vec<T> = y.iter().zip(&ks).map(|(&a, &b)| a - b).collect();
    h.apply_lowpass_complement(&r)
}

/// Moves the kernel peak to the center tap and shifts the spikes the other
/// way. Returns the new pair and the shift `d` applied to the spikes.
pub fn recenter<T: Scalar>(s: &[T], k: &Kernel<T>) -> Result<(Vec<T>, Kernel<T>, isize)> {
    let d = k.argmax() as isize - k.center() as isize;
    if d == 0 {
        return Ok((s.to_vec(), k.clone(), 0));
    }
    Ok((shift_zero_fill(s, d), shift_kernel(k, -d)?, d))
}

/// Default starting point: constant spikes at 1 and a unit-width Gaussian
/// kernel.
pub fn default_init<T: Scalar>(len: usize, kernel_len: usize) -> Result<(Signal<T>, Kernel<T>)> {
    Ok((
        Signal::constant(len, T::one())?,
        Kernel::gaussian(kernel_len, T::one())?,
    ))
}

/// Per-iteration hook for [`solve_with_observer`].
#[derive(Debug)]
pub struct IterationState<'a, T> {
    pub iteration: usize,
    pub s: &'a [T],
    pub k: &'a [T],
    pub objective: T,
    pub tr_tests: usize,
}

pub fn solve<T: Scalar, H: HighPass<T> + ?Sized>(
    y: &[T],
    init_s: &[T],
    init_pi: &Kernel<T>,
    h: &H,
    prm: &SpoqParams<T>,
    cfg: &SolverConfig<T>,
) -> Result<Decomposition<T>> {
    solve_with_observer(y, init_s, init_pi, h, prm, cfg, |_| {})
}

#[allow(clippy::too_many_arguments)]
pub fn solve_with_observer<T: Scalar, H: HighPass<T> + ?Sized>(
    y: &[T],
    init_s: &[T],
    init_pi: &Kernel<T>,
    h: &H,
    prm: &SpoqParams<T>,
    cfg: &SolverConfig<T>,
    mut observe: impl FnMut(&IterationState<'_, T>),
) -> Result<Decomposition<T>> {
    prm.validate()?;
    cfg.validate()?;
    let n = y.len();
    if init_s.len() != n || h.len() != n {
        return Err(Error::Dimension(format!(
            "observation has {n} samples, initial signal {} and filter {}",
            init_s.len(),
            h.len()
        )));
    }
    if init_s.iter().any(|&v| v < T::zero() || !v.is_finite()) {
        return Err(Error::InvalidSignal(
            "initial signal must be finite and nonnegative".into(),
        ));
    }
    let power = EigenSettings::default();
    let epsilon = cfg.epsilon_for(n);

    let mut s = init_s.to_vec();
    let mut k = init_pi.clone();
    let mut warm_s: Option<Vec<T>> = None;
    let mut warm_pi: Option<Vec<T>> = None;
    let mut trace = vec![objective(&s, &k, y, h, prm)?];
    let mut tests = Vec::new();
    let stop_reason;
    loop {
        let (l1, v1) = lipschitz_s_with(&k, h, warm_s.take(), &power)?;
        warm_s = Some(v1);
        let (s_next, used) = update_s_with(&s, &k, y, h, prm, cfg, l1)?;

        let (l2, v2) = lipschitz_pi_with(&s_next, k.len(), h, warm_pi.take(), &power)?;
        warm_pi = Some(v2);
        let k_next = update_pi_with(&k, &s_next, y, h, cfg, l2)?;

        let moved = norm2(
            &s.iter()
                .zip(&s_next)
                .map(|(&a, &b)| a - b)
                .collect::<Vec<_>>(),
        );
        s = s_next;
        k = k_next;
        tests.push(used);
        trace.push(objective(&s, &k, y, h, prm)?);
        observe(&IterationState {
            iteration: tests.len(),
            s: &s,
            k: &k,
            objective: trace[trace.len() - 1],
            tr_tests: used,
        });

        if moved <= epsilon {
            stop_reason = StopReason::Tolerance;
            break;
        }
        if tests.len() >= cfg.k_max {
            stop_reason = StopReason::IterationCap;
            break;
        }
    }

    let t_hat = estimate_trend(y, &s, &k, h)?;
    let (s_hat, pi_hat, shift) = recenter(&s, &k)?;
    Ok(Decomposition {
        s_hat: Signal::new(s_hat)?,
        pi_hat,
        t_hat: Signal::new(t_hat)?,
        iterations: tests.len(),
        objective_trace: trace,
        tr_tests_per_iter: tests,
        stop_reason,
        recenter_shift: shift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fidelity::{lipschitz_s, rho, HighPassOperator};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn radii_schedule() {
        let s = [2.0, 0.0, 0.0];
        assert_eq!(tr_radii(&s, 4.0, 0.5, 4), vec![16.0, 8.0, 4.0, 0.0]);
        assert_eq!(tr_radii(&[0.0; 5], 2.0, 0.5, 3), vec![0.0, 0.0, 0.0]);
        assert_eq!(tr_radii(&s, 2.0, 0.5, 1), vec![0.0]);
        let r = tr_radii(&[1.0, 3.0], 2.0, 0.5, 50);
        assert_eq!(r.len(), 50);
        assert_eq!(*r.last().unwrap(), 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::<f64>::default().validate().is_ok());
        let bad = SolverConfig {
            gamma_s: 2.0,
            ..SolverConfig::<f64>::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            theta: 1.0,
            ..SolverConfig::<f64>::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            k_max: 0,
            ..SolverConfig::<f64>::default()
        };
        assert!(bad.validate().is_err());
        assert_abs_diff_eq!(
            SolverConfig::<f64>::default().epsilon_for(200),
            1e-6 * 200f64.sqrt()
        );
        let cfg: SolverConfig<f64> = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, SolverConfig::default());
        let cfg: SolverConfig<f64> =
            serde_json::from_str(r#"{"k_max": 7, "epsilon": 0.5}"#).unwrap();
        assert_eq!((cfg.k_max, cfg.epsilon), (7, Some(0.5)));
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        // s_k = 0 with y = 0: both rho and psi are stationary
        let h = HighPassOperator::new(16, 2).unwrap();
        let k = Kernel::<f64>::delta(3).unwrap();
        let prm = SpoqParams::soot(0.1);
        let zero = vec![0.0; 16];
        let (next, used) = update_s(&zero, &k, &zero, &h, &prm, &SolverConfig::default()).unwrap();
        assert_eq!(next, zero);
        assert_eq!(used, 1);
        let k2 = update_pi(&k, &zero, &zero, &h, &SolverConfig::default()).unwrap();
        assert_eq!(k2, k);
    }

    #[test]
    fn small_instance_updates_descend() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let n = 8;
        let h = HighPassOperator::new(n, 1).unwrap();
        let prm = SpoqParams::soot(0.05);
        let cfg = SolverConfig::default();
        for _ in 0..50 {
            let s: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..3.0)).collect();
            let k =
                Kernel::normalized((0..3).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..4.0)).collect();
            let l1 = lipschitz_s(&k, &h).unwrap();
            let (next, used) = update_s_with(&s, &k, &y, &h, &prm, &cfg, l1).unwrap();
            let radii = tr_radii(&s, prm.q, cfg.theta, cfg.max_tr_tests);
            let accepted = radii[used - 1];
            let sum_q: f64 = next.iter().map(|v| v * v).sum();
            assert!(sum_q >= accepted);
            assert!(next.iter().all(|&v| v >= 0.0));
            let before = objective(&s, &k, &y, &h, &prm).unwrap();
            let after = objective(&next, &k, &y, &h, &prm).unwrap();
            assert!(after <= before + 1e-10, "{after} > {before}");

            let k_next = update_pi(&k, &next, &y, &h, &cfg).unwrap();
            assert_abs_diff_eq!(k_next.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            let r0 = rho(&next, &k, &y, &h).unwrap();
            let r1 = rho(&next, &k_next, &y, &h).unwrap();
            assert!(r1 <= r0 + 1e-10);
        }
    }

    #[test]
    fn trend_estimates() {
        use std::f64::consts::PI;
        let n = 64;
        let h = HighPassOperator::new(n, 4).unwrap();
        let k = Kernel::<f64>::gaussian(7, 1.0).unwrap();
        let mut s = vec![0.0; n];
        s[20] = 3.0;
        s[41] = 1.5;
        let x = convolve_same(&s, &k).unwrap();
        let t = estimate_trend(&x, &s, &k, &h).unwrap();
        assert!(t.iter().all(|v| v.abs() < 1e-12));

        let shifted: Vec<f64> = x.iter().map(|v| v + 2.5).collect();
        let t = estimate_trend(&shifted, &s, &k, &h).unwrap();
        assert!(t.iter().all(|v| (v - 2.5).abs() < 1e-12));

        let low: Vec<f64> = (0..n)
            .map(|i| (2.0 * PI * 2.0 * i as f64 / n as f64).cos())
            .collect();
        let high: Vec<f64> = (0..n)
            .map(|i| 0.3 * (2.0 * PI * 9.0 * i as f64 / n as f64 + 0.4).sin())
            .collect();
        let y: Vec<f64> = (0..n).map(|i| x[i] + low[i] + high[i]).collect();
        let t = estimate_trend(&y, &s, &k, &h).unwrap();
        for i in 0..n {
            assert_abs_diff_eq!(t[i], low[i], epsilon = 1e-10);
        }
    }

    #[test]
    fn recenter_cases() {
        let k = Kernel::<f64>::gaussian(9, 1.0).unwrap();
        let s = vec![0.0, 1.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let (s2, k2, d) = recenter(&s, &k).unwrap();
        assert_eq!((s2, k2, d), (s.clone(), k, 0));

        let mut taps = vec![0.0; 9];
        taps[4 + 3] = 1.0;
        let (s2, k2, d) = recenter(&s, &Kernel::new(taps).unwrap()).unwrap();
        assert_eq!(d, 3);
        assert_eq!(k2.argmax(), 4);
        assert_eq!(s2[4], 1.0);
        assert_eq!(s2[6], 2.0);
    }

    #[test]
    fn recenter_preserves_interior_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let n = 60;
        let l = 11;
        for _ in 0..20 {
            let peak = rng.random_range(0..l) as f64;
            let taps: Vec<f64> = (0..l)
                .map(|i| (-((i as f64 - peak).powi(2)) / 3.0).exp())
                .collect();
            let k = Kernel::normalized(taps).unwrap();
            let s: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let (s2, k2, d) = recenter(&s, &k).unwrap();
            let after = convolve_same(&s2, &k2).unwrap();
            // taps pushed off the edge are dropped and the rest renormalized
            let kept_taps = shift_zero_fill(&shift_zero_fill(&k, -d), d);
            let kept: f64 = kept_taps.iter().sum();
            let before = convolve_same(&s, &kept_taps).unwrap();
            let margin = l / 2 + d.unsigned_abs();
            for i in margin..n - margin {
                assert_abs_diff_eq!(before[i] / kept, after[i], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn single_iteration_cap() {
        let n = 40;
        let h = HighPassOperator::new(n, 2).unwrap();
        let (s0, k0) = default_init::<f64>(n, 7).unwrap();
        let y: Vec<f64> = (0..n).map(|i| if i % 9 == 0 { 3.0 } else { 0.1 }).collect();
        let cfg = SolverConfig {
            k_max: 1,
            ..SolverConfig::default()
        };
        let dec = solve(&y, &s0, &k0, &h, &SpoqParams::soot(0.1), &cfg).unwrap();
        assert_eq!(dec.iterations, 1);
        assert_eq!(dec.stop_reason, StopReason::IterationCap);
        assert_eq!(dec.objective_trace.len(), 2);
        assert_eq!(dec.tr_tests_per_iter.len(), 1);
    }

    #[test]
    fn solve_rejects_bad_inputs() {
        let h = HighPassOperator::new(20, 2).unwrap();
        let (s0, k0) = default_init::<f64>(20, 5).unwrap();
        let prm = SpoqParams::soot(0.1);
        let cfg = SolverConfig::default();
        assert!(solve(&[0.0; 19], &s0, &k0, &h, &prm, &cfg).is_err());
        let mut neg = s0.to_vec();
        neg[3] = -1.0;
        assert!(solve(&[0.0; 20], &neg, &k0, &h, &prm, &cfg).is_err());
        let bad = SpoqParams { beta: 1e5, ..prm };
        assert!(solve(&[0.0; 20], &s0, &k0, &h, &bad, &cfg).is_err());
    }
}
