//! Bayesian estimation of the fractional order of a time-fractional
//! advection-diffusion solution.
//!
//! The noiseless pressure surface is
//!
//! ```text
//! p(x, t) = e^{-x} * sum_{k>=0} 2 t^{ak} / Gamma(ak + 1)
//! ```
//!
//! and observations carry multiplicative log-normal noise. The crate
//! evaluates the surface, simulates datasets, evaluates priors and the
//! likelihood for `theta = (alpha, sigma^2)`, draws posterior samples by
//! sampling importance resampling, and summarizes the posterior and its
//! predictive distribution.
//!
//! Everything here is `no_std` (with `alloc`). Transcendental functions come
//! from `libm`, so results are bitwise reproducible across platforms and
//! thread counts. IO, parallel executors and the command line live in the
//! `fracbayes` crate.

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` style checks are meant to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Coefficients and reference values keep the digits they were computed with.
#![allow(clippy::excessive_precision)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
mod math;

pub mod data;
pub mod exec;
pub mod model;
pub mod proposal;
pub mod rng;
pub mod series;
pub mod sir;
pub mod special;
pub mod summary;

pub use data::{make_grid, simulate_dataset, Axis, Dataset, GridSpec, Observation, Provenance};
pub use error::{Error, Result};
pub use exec::{Executor, Sequential};
pub use model::{log_likelihood, log_prior, log_unnorm_posterior, LogLikelihood, PriorSpec, Theta};
pub use proposal::{AdaptiveFit, ProposalBox, ProposalKind, ProposalSpec};
pub use series::{evaluate_pressure, evaluate_surface, series_factor, EvalPoint, FractionalOrder, SeriesConfig};
pub use sir::{
    compute_log_weights, draw_candidates, fit_adaptive_proposal, normalize_weights, resample, run_sir, run_sir_detailed,
    Candidate, PosteriorSampleSet, SirConfig, SirDiagnostics, SirRun,
};
pub use special::ln_gamma;
pub use summary::{
    credible_interval, posterior_predictive, predictive_coverage, predictive_profiles, quantile, CredibleInterval,
    PredictiveProfile, ProfilePoint,
};
