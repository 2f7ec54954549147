//! Seeded synthetic observations, hyperparameter tuning and the
//! multi-realization benchmark.
//!
//! Every random draw comes from `ChaCha8Rng::seed_from_u64(seed)` with a
//! fixed stream per component (spikes 0, trend 1, noise 2). Gaussian noise
//! uses the ziggurat sampler of `rand_distr::StandardNormal`. Realization
//! `r` of an experiment uses seed `base_seed + r` for `r >= 1`; seed
//! `base_seed` itself is reserved for the tuning realization.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fidelity::HighPassOperator;
use crate::metrics::{snr, support_of, tsnr, MetricsReport};
use crate::norms::SpoqParams;
use crate::signal::{convolve_same, Kernel, Signal};
use crate::solver::{default_init, solve, Decomposition, SolverConfig, StopReason};

const SPIKE_STREAM: u64 = 0;
const TREND_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;

fn component_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Gaussian peak shape with its `len` taps spread over the abscissa `[-1, 1]`.
pub fn gen_gaussian_kernel(len: usize, sigma: f64) -> Result<Kernel<f64>> {
    if len.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "kernel length {len} must be odd"
        )));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(
            "kernel width must be positive".into(),
        ));
    }
    if len == 1 {
        return Kernel::delta(1);
    }
    let spacing = 2.0 / (len - 1) as f64;
    Kernel::gaussian(len, sigma / spacing)
}

/// Sparse nonnegative spike train with exactly `n_spikes` entries, pairwise
/// at least `min_gap` samples apart. Returns the train and its sorted support.
pub fn gen_spike_train(
    len: usize,
    n_spikes: usize,
    min_gap: usize,
    amp_low: f64,
    amp_high: f64,
    seed: u64,
) -> Result<(Signal<f64>, Vec<usize>)> {
    if n_spikes * (min_gap + 1) > len {
        return Err(Error::Infeasible(format!(
            "{n_spikes} spikes with gap {min_gap} do not fit in {len} samples"
        )));
    }
    if !(amp_low > 0.0 && amp_high >= amp_low) {
        return Err(Error::InvalidParameter(format!(
            "amplitude range [{amp_low}, {amp_high}] must be positive and ordered"
        )));
    }
    let mut s = vec![0.0; len];
    if n_spikes == 0 {
        return Ok((Signal::new(s)?, Vec::new()));
    }
    let mut rng = component_rng(seed, SPIKE_STREAM);
    // Uniform over all admissible layouts: draw sorted positions from a
    // compressed line and re-insert the mandatory gaps.
    let pad = min_gap.max(1) - 1;
    let slots = len - (n_spikes - 1) * pad;
    let mut picks = index::sample(&mut rng, slots, n_spikes).into_vec();
    picks.sort_unstable();
    let support: Vec<usize> = picks
        .iter()
        .enumerate()
        .map(|(i, &p)| p + i * pad)
        .collect();
    for &pos in &support {
        s[pos] = rng.random_range(amp_low..=amp_high);
    }
    Ok((Signal::new(s)?, support))
}

/// Slowly varying baseline: an offset plus two or three cosines at bins
/// `1..=max_bin`, scaled so that `max |t| = amplitude`.
pub fn gen_trend(len: usize, amplitude: f64, max_bin: usize, seed: u64) -> Result<Signal<f64>> {
    if amplitude == 0.0 {
        return Signal::zeros(len);
    }
    if !(amplitude > 0.0) {
        return Err(Error::InvalidParameter(
            "trend amplitude must be nonnegative".into(),
        ));
    }
    if max_bin > len / 2 {
        return Err(Error::InvalidParameter(format!(
            "trend bin {max_bin} exceeds Nyquist for length {len}"
        )));
    }
    let mut rng = component_rng(seed, TREND_STREAM);
    let offset: f64 = rng.random_range(0.0..1.0);
    let n_cos = rng.random_range(2..=3usize).min(max_bin);
    let mut bins = if max_bin > 0 {
        index::sample(&mut rng, max_bin, n_cos).into_vec()
    } else {
        Vec::new()
    };
    bins.sort_unstable();
    let parts: Vec<(usize, f64, f64)> = bins
        .into_iter()
        .map(|b| {
            (
                b + 1,
                rng.random_range(0.5..1.0),
                rng.random_range(0.0..2.0 * PI),
            )
        })
        .collect();
    let raw: Vec<f64> = (0..len)
        .map(|n| {
            parts.iter().fold(offset, |acc, &(bin, w, phase)| {
                acc + w * (2.0 * PI * (bin * n) as f64 / len as f64 + phase).cos()
            })
        })
        .collect();
    let peak = raw.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    Signal::new(raw.into_iter().map(|v| v * amplitude / peak).collect())
}

/// One synthetic instance of `y = s * k + t + noise`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub s_true: Signal<f64>,
    pub pi_true: Kernel<f64>,
    pub t_true: Signal<f64>,
    pub support: Vec<usize>,
    pub noise_percent: f64,
    /// Noise standard deviation, `noise_percent / 100 * max(s * k)`.
    pub sigma: f64,
    pub y: Signal<f64>,
    pub seed: u64,
}

/// Adds white Gaussian noise at `noise_percent` of the peak of `s * k`.
pub fn gen_observation(
    s_true: Signal<f64>,
    pi_true: Kernel<f64>,
    t_true: Signal<f64>,
    noise_percent: f64,
    seed: u64,
) -> Result<GroundTruth> {
    if t_true.len() != s_true.len() {
        return Err(Error::Dimension(
            "trend and spike train differ in length".into(),
        ));
    }
    if !(noise_percent >= 0.0) {
        return Err(Error::InvalidParameter(
            "noise level must be nonnegative".into(),
        ));
    }
    let x = convolve_same(&s_true, &pi_true)?;
    let x_max = x.iter().fold(f64::MIN, |m, &v| m.max(v));
    let sigma = noise_percent / 100.0 * x_max;
    let mut y: Vec<f64> = x.iter().zip(t_true.iter()).map(|(a, b)| a + b).collect();
    if sigma > 0.0 {
        let mut rng = component_rng(seed, NOISE_STREAM);
        for v in y.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += sigma * z;
        }
    }
    let support = support_of(&s_true);
    Ok(GroundTruth {
        y: Signal::new(y)?,
        s_true,
        pi_true,
        t_true,
        support,
        noise_percent,
        sigma,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatasetStyle {
    /// 10 spikes (5% of 200 samples).
    C,
    /// 20 spikes (10% of 200 samples).
    D,
}

impl DatasetStyle {
    pub fn n_spikes(self) -> usize {
        match self {
            DatasetStyle::C => 10,
            DatasetStyle::D => 20,
        }
    }
}

/// Shape of the synthetic instances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub len: usize,
    pub kernel_len: usize,
    /// Kernel standard deviation on the `[-1, 1]` tap abscissa.
    pub kernel_sigma: f64,
    pub min_gap: usize,
    pub amp_low: f64,
    pub amp_high: f64,
    pub trend_amplitude: f64,
    pub trend_max_bin: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            len: 200,
            kernel_len: 21,
            kernel_sigma: 0.15,
            min_gap: 4,
            amp_low: 1.0,
            amp_high: 10.0,
            trend_amplitude: 2.0,
            trend_max_bin: 3,
        }
    }
}

/// How the default cutoff candidates are chosen when none are listed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffRule {
    /// Bins `1..=count`.
    #[default]
    FirstBins,
    /// The `count` bins in `1..=N/2` where `|DFT(y)|` is largest.
    LargestMagnitudes,
}

/// Hyperparameter grid; empty `k_max` keeps the solver's own cap.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningGrid {
    pub lambda: Vec<f64>,
    pub beta: Vec<f64>,
    pub eta: Vec<f64>,
    #[serde(default)]
    pub k_max: Vec<usize>,
}

impl TuningGrid {
    pub fn points(&self, base: &SpoqParams<f64>) -> Vec<(SpoqParams<f64>, Option<usize>)> {
        let caps: Vec<Option<usize>> = if self.k_max.is_empty() {
            vec![None]
        } else {
            self.k_max.iter().map(|&k| Some(k)).collect()
        };
        let mut out = Vec::new();
        for &lambda in &self.lambda {
            for &beta in &self.beta {
                for &eta in &self.eta {
                    for &cap in &caps {
                        out.push((
                            SpoqParams {
                                lambda,
                                beta,
                                eta,
                                ..*base
                            },
                            cap,
                        ));
                    }
                }
            }
        }
        out
    }
}

fn default_realizations() -> usize {
    30
}

fn default_cutoff_count() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset_style: DatasetStyle,
    pub noise_percent: f64,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    pub base_seed: u64,
    pub spoq: SpoqParams<f64>,
    #[serde(default)]
    pub solver: SolverConfig<f64>,
    /// Explicit cutoff candidates; empty means "derive from `cutoff_rule`".
    #[serde(default)]
    pub cutoff_candidates: Vec<usize>,
    #[serde(default)]
    pub cutoff_rule: CutoffRule,
    #[serde(default = "default_cutoff_count")]
    pub cutoff_count: usize,
    /// Fixed cutoff; when absent it is selected on the tuning realization.
    #[serde(default)]
    pub cutoff: Option<usize>,
    #[serde(default)]
    pub generator: GeneratorConfig,
    #[serde(default)]
    pub grid: Option<TuningGrid>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.realizations < 1 {
            return Err(Error::InvalidParameter(
                "realizations must be at least 1".into(),
            ));
        }
        if !(self.noise_percent >= 0.0) {
            return Err(Error::InvalidParameter(
                "noise_percent must be nonnegative".into(),
            ));
        }
        self.spoq.validate()?;
        self.solver.validate()?;
        let half = self.generator.len / 2;
        if let Some(&bad) = self
            .cutoff_candidates
            .iter()
            .chain(self.cutoff.iter())
            .find(|&&c| c < 1 || c > half)
        {
            return Err(Error::InvalidParameter(format!(
                "cutoff {bad} outside [1, {half}]"
            )));
        }
        Ok(())
    }

    /// Ground truth for realization `r` (`r = 0` is the tuning instance).
    pub fn ground_truth(&self, realization: usize) -> Result<GroundTruth> {
        generate(
            &self.generator,
            self.dataset_style,
            self.noise_percent,
            self.base_seed + realization as u64,
        )
    }

    pub fn tuning_truth(&self) -> Result<GroundTruth> {
        self.ground_truth(0)
    }

    pub fn candidates_for(&self, y: &[f64]) -> Result<Vec<usize>> {
        if !self.cutoff_candidates.is_empty() {
            return Ok(self.cutoff_candidates.clone());
        }
        default_cutoff_candidates(y, self.cutoff_rule, self.cutoff_count)
    }
}

/// Builds one complete instance from the generator settings.
pub fn generate(
    gen: &GeneratorConfig,
    style: DatasetStyle,
    noise_percent: f64,
    seed: u64,
) -> Result<GroundTruth> {
    let kernel = gen_gaussian_kernel(gen.kernel_len, gen.kernel_sigma)?;
    let (s, _) = gen_spike_train(
        gen.len,
        style.n_spikes(),
        gen.min_gap,
        gen.amp_low,
        gen.amp_high,
        seed,
    )?;
    let t = gen_trend(gen.len, gen.trend_amplitude, gen.trend_max_bin, seed)?;
    gen_observation(s, kernel, t, noise_percent, seed)
}

pub fn default_cutoff_candidates(y: &[f64], rule: CutoffRule, count: usize) -> Result<Vec<usize>> {
    let half = y.len() / 2;
    if half == 0 || count == 0 {
        return Err(Error::InvalidParameter("no admissible cutoff bins".into()));
    }
    let count = count.min(half);
    match rule {
        CutoffRule::FirstBins => Ok((1..=count).collect()),
        CutoffRule::LargestMagnitudes => {
            let mut buf: Vec<Complex<f64>> = y.iter().map(|&v| Complex::new(v, 0.0)).collect();
            FftPlanner::new()
                .plan_fft_forward(y.len())
                .process(&mut buf);
            let mut bins: Vec<usize> = (1..=half).collect();
            // stable sort keeps lower bins first on equal magnitude
            bins.sort_by(|&a, &b| buf[b].norm().total_cmp(&buf[a].norm()));
            let mut picked = bins[..count].to_vec();
            picked.sort_unstable();
            Ok(picked)
        }
    }
}

/// Runs the solver from the default start and scores it against `gt`.
pub fn evaluate(
    gt: &GroundTruth,
    prm: &SpoqParams<f64>,
    cfg: &SolverConfig<f64>,
    cutoff: usize,
) -> Result<(Decomposition<f64>, MetricsReport)> {
    let h = HighPassOperator::new(gt.y.len(), cutoff)?;
    let (s0, k0) = default_init(gt.y.len(), gt.pi_true.len())?;
    let dec = solve(&gt.y, &s0, &k0, &h, prm, cfg)?;
    let report = score(gt, &dec)?;
    Ok((dec, report))
}

pub fn score(gt: &GroundTruth, dec: &Decomposition<f64>) -> Result<MetricsReport> {
    Ok(MetricsReport::new(
        snr(&gt.s_true, &dec.s_hat)?,
        tsnr(&gt.s_true, &dec.s_hat, &gt.support)?,
        snr(&gt.t_true, &dec.t_hat)?,
        snr(&gt.pi_true, &dec.pi_hat)?,
    ))
}

/// Relative slack below which two composite scores count as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Index of the best score; ties (within [`TIE_TOLERANCE`]) keep the earlier
/// entry. `None` entries are failed candidates.
pub fn argmax_first(scores: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.iter().enumerate() {
        let Some(v) = *s else { continue };
        match best {
            Some((_, b)) if v <= b + TIE_TOLERANCE * (1.0 + b.abs()) => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start {jobs} worker threads: {e}")))
}

/// One line of a cutoff or grid scoreboard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub cutoff: usize,
    pub lambda: f64,
    pub beta: f64,
    pub eta: f64,
    pub k_max: usize,
    pub composite: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffSelection {
    pub cutoff: usize,
    pub scoreboard: Vec<ScoreEntry>,
}

fn entry(
    cutoff: usize,
    prm: &SpoqParams<f64>,
    cfg: &SolverConfig<f64>,
    result: Result<(Decomposition<f64>, MetricsReport)>,
) -> ScoreEntry {
    let (composite, error) = match result {
        Ok((_, r)) => (Some(r.composite), None),
        Err(e) => (None, Some(e.to_string())),
    };
    ScoreEntry {
        cutoff,
        lambda: prm.lambda,
        beta: prm.beta,
        eta: prm.eta,
        k_max: cfg.k_max,
        composite,
        error,
    }
}

/// Picks the cutoff bin maximizing the composite score on `tuning`; ties go
/// to the smaller bin.
pub fn select_cutoff(
    candidates: &[usize],
    tuning: &GroundTruth,
    prm: &SpoqParams<f64>,
    cfg: &SolverConfig<f64>,
    jobs: usize,
) -> Result<CutoffSelection> {
    if candidates.is_empty() {
        return Err(Error::InvalidParameter("no cutoff candidates".into()));
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let scoreboard: Vec<ScoreEntry> = pool(jobs)?.install(|| {
        sorted
            .par_iter()
            .map(|&fc| entry(fc, prm, cfg, evaluate(tuning, prm, cfg, fc)))
            .collect()
    });
    let scores: Vec<Option<f64>> = scoreboard.iter().map(|e| e.composite).collect();
    let best = argmax_first(&scores).ok_or_else(|| {
        Error::AllCandidatesFailed(format!("{} cutoff candidates failed", scoreboard.len()))
    })?;
    Ok(CutoffSelection {
        cutoff: sorted[best],
        scoreboard,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningOutcome {
    pub best: SpoqParams<f64>,
    pub k_max: usize,
    pub cutoff: usize,
    pub scoreboard: Vec<ScoreEntry>,
}

/// Exhaustive grid search on the tuning realization at a fixed cutoff.
pub fn tune_hyperparams(
    grid: &TuningGrid,
    base: &SpoqParams<f64>,
    tuning: &GroundTruth,
    cfg: &SolverConfig<f64>,
    cutoff: usize,
    jobs: usize,
) -> Result<TuningOutcome> {
    let points = grid.points(base);
    if points.is_empty() {
        return Err(Error::InvalidParameter("tuning grid is empty".into()));
    }
    let scoreboard: Vec<ScoreEntry> = pool(jobs)?.install(|| {
        points
            .par_iter()
            .map(|(prm, cap)| {
                let cfg = SolverConfig {
                    k_max: cap.unwrap_or(cfg.k_max),
                    ..*cfg
                };
                let result = prm
                    .validate()
                    .and_then(|_| evaluate(tuning, prm, &cfg, cutoff));
                entry(cutoff, prm, &cfg, result)
            })
            .collect()
    });
    let scores: Vec<Option<f64>> = scoreboard.iter().map(|e| e.composite).collect();
    let best = argmax_first(&scores).ok_or_else(|| {
        Error::AllCandidatesFailed(format!("all {} grid points failed", points.len()))
    })?;
    Ok(TuningOutcome {
        best: points[best].0,
        k_max: scoreboard[best].k_max,
        cutoff,
        scoreboard,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub realization: usize,
    pub seed: u64,
    pub snr_s: f64,
    pub tsnr_s: f64,
    pub snr_t: f64,
    pub snr_pi: f64,
    pub iterations: usize,
    pub stop_reason: StopReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStat {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
    pub n: usize,
}

impl SummaryStat {
    /// Two-pass mean and sample standard deviation.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
                n,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std, n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationFailure {
    pub realization: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub cutoff: usize,
    pub rows: Vec<BenchmarkRow>,
    pub failures: Vec<RealizationFailure>,
}

impl BenchmarkTable {
    /// `{metric: {mean, std, n}}` over the successful rows.
    pub fn summary(&self) -> BTreeMap<String, SummaryStat> {
        let col = |f: fn(&BenchmarkRow) -> f64| self.rows.iter().map(f).collect::<Vec<_>>();
        let mut out = BTreeMap::new();
        out.insert("snr_s".to_string(), SummaryStat::of(&col(|r| r.snr_s)));
        out.insert("tsnr_s".to_string(), SummaryStat::of(&col(|r| r.tsnr_s)));
        out.insert("snr_t".to_string(), SummaryStat::of(&col(|r| r.snr_t)));
        out.insert("snr_pi".to_string(), SummaryStat::of(&col(|r| r.snr_pi)));
        out
    }
}

/// Solves and scores realizations `1..=realizations`. Results do not depend
/// on `jobs`.
pub fn run_benchmark(cfg: &ExperimentConfig, jobs: usize) -> Result<BenchmarkTable> {
    cfg.validate()?;
    let cutoff = match cfg.cutoff {
        Some(c) => c,
        None => {
            let tuning = cfg.tuning_truth()?;
            let candidates = cfg.candidates_for(&tuning.y)?;
            select_cutoff(&candidates, &tuning, &cfg.spoq, &cfg.solver, jobs)?.cutoff
        }
    };
    let outcomes: Vec<(usize, u64, Result<BenchmarkRow>)> = pool(jobs)?.install(|| {
        (1..=cfg.realizations)
            .into_par_iter()
            .map(|r| {
                let seed = cfg.base_seed + r as u64;
                let row = cfg.ground_truth(r).and_then(|gt| {
                    let (dec, rep) = evaluate(&gt, &cfg.spoq, &cfg.solver, cutoff)?;
                    Ok(BenchmarkRow {
                        realization: r,
                        seed,
                        snr_s: rep.snr_s,
                        tsnr_s: rep.tsnr_s,
                        snr_t: rep.snr_t,
                        snr_pi: rep.snr_pi,
                        iterations: dec.iterations,
                        stop_reason: dec.stop_reason,
                    })
                });
                (r, seed, row)
            })
            .collect()
    });
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (realization, seed, outcome) in outcomes {
        match outcome {
            Ok(row) => rows.push(row),
            Err(e) => failures.push(RealizationFailure {
                realization,
                seed,
                error: e.to_string(),
            }),
        }
    }
    Ok(BenchmarkTable {
        cutoff,
        rows,
        failures,
    })
}
