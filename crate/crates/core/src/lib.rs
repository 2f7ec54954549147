//! Joint baseline removal and sparse blind deconvolution of 1-D peak signals.
//!
//! An observation `y = s * k + t + noise` is split into a nonnegative sparse
//! spike train `s`, a short nonnegative unit-sum peak shape `k` and a slowly
//! varying trend `t`. The estimator minimizes a high-pass filtered
//! least-squares fit plus a smoothed log(ℓp/ℓq) sparsity penalty by
//! alternating a variable-metric proximal step on `s` with a projected
//! gradient step on `k`.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! synthetic benchmark harness in [`synth`] is `f64` only.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fidelity;
pub mod io;
pub mod metric;
pub mod metrics;
pub mod norms;
pub mod objective;
pub mod projection;
pub mod scalar;
pub mod signal;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
pub use fidelity::{EigenSettings, HighPass, HighPassOperator};
pub use metrics::MetricsReport;
pub use norms::SpoqParams;
pub use scalar::Scalar;
pub use signal::{Kernel, Signal};
pub use solver::{solve, solve_with_observer, Decomposition, SolverConfig, StopReason};

pub type Signal64 = Signal<f64>;
pub type Kernel64 = Kernel<f64>;
pub type SpoqParams64 = SpoqParams<f64>;
pub type SolverConfig64 = SolverConfig<f64>;
pub type Decomposition64 = Decomposition<f64>;
pub type HighPass64 = HighPassOperator<f64>;

pub type Signal32 = Signal<f32>;
pub type Kernel32 = Kernel<f32>;
pub type SpoqParams32 = SpoqParams<f32>;
pub type SolverConfig32 = SolverConfig<f32>;
pub type Decomposition32 = Decomposition<f32>;
pub type HighPass32 = HighPassOperator<f32>;
