//! Sampling importance resampling.
//!
//! 1. draw `n_c` candidates from a proposal `p_c`;
//! 2. weight each by `prior * likelihood / p_c` (in log space);
//! 3. normalize the weights;
//! 4. resample `n_s` candidates with replacement by those weights.
//!
//! Candidate `i` is drawn from its own stream, weights are evaluated
//! independently, and every reduction runs in index order, so a run is a pure
//! function of the inputs and the seed whatever the executor.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::math::{exp, sqrt};
use crate::model::{log_prior, posterior_with, LogLikelihood, PriorSpec, Theta};
use crate::proposal::{self, unit, AdaptiveFit, Drawn, ProposalSpec};
use crate::rng::{self, tags};
use crate::series::SeriesConfig;

pub use crate::proposal::Candidate;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SirConfig {
    /// Number of candidates.
    pub n_c: usize,
    /// Number of posterior samples.
    pub n_s: usize,
    pub seed: u64,
    pub proposal: ProposalSpec,
}

impl Default for SirConfig {
    fn default() -> Self {
        SirConfig { n_c: 10_000, n_s: 1_000, seed: 0, proposal: ProposalSpec::default() }
    }
}

impl SirConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_s == 0 {
            return Err(Error::InvalidConfig { field: "sir.n_s", reason: "must be at least 1" });
        }
        if self.n_c < self.n_s {
            return Err(Error::InvalidConfig { field: "sir.n_c", reason: "must be at least n_s" });
        }
        self.proposal.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SirDiagnostics {
    /// Distinct resampled candidates over `n_s`.
    pub unique_fraction: f64,
    /// `1 / sum w*^2`.
    pub ess: f64,
    pub max_weight: f64,
    pub n_finite_weights: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorSampleSet {
    pub samples: Vec<Theta>,
    /// Candidate index behind each sample.
    pub indices: Vec<usize>,
    pub diagnostics: SirDiagnostics,
}

impl PosteriorSampleSet {
    pub fn alphas(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.alpha).collect()
    }

    pub fn sigmas(&self) -> Vec<f64> {
        self.samples.iter().map(Theta::sigma).collect()
    }

    pub fn sigma2s(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.sigma2).collect()
    }
}

/// Everything a run produced, for diagnostics and importance-sampling
/// estimates over the full candidate set.
#[derive(Clone, Debug)]
pub struct SirRun {
    pub candidates: Vec<Candidate>,
    pub log_weights: Vec<f64>,
    pub weights: Vec<f64>,
    pub posterior: PosteriorSampleSet,
    pub adaptive: Option<AdaptiveFit>,
}

impl SirRun {
    /// Self-normalized importance estimate of `E[f(theta)]` and its standard
    /// error `sqrt(sum w_i^2 (f_i - mean)^2)`.
    pub fn weighted_mean<F: Fn(&Theta) -> f64>(&self, f: F) -> (f64, f64) {
        let mut mean = 0.0;
        for (c, &w) in self.candidates.iter().zip(&self.weights) {
            if w > 0.0 {
                mean += w * f(&c.theta);
            }
        }
        let mut var = 0.0;
        for (c, &w) in self.candidates.iter().zip(&self.weights) {
            if w > 0.0 {
                let d = f(&c.theta) - mean;
                var += w * w * d * d;
            }
        }
        (mean, sqrt(var))
    }
}

/// Step 1: `n_c` candidates from the configured proposal.
pub fn draw_candidates<E: Executor>(
    cfg: &SirConfig,
    prior: &PriorSpec,
    dataset: &Dataset,
    series: &SeriesConfig,
    exec: &E,
) -> Result<Vec<Candidate>> {
    cfg.validate()?;
    prior.validate()?;
    series.validate()?;
    let lik = LogLikelihood::new(dataset);
    Ok(draw_with(cfg, prior, &lik, series, exec)?.0.into_iter().map(|d| d.candidate).collect())
}

/// The adaptive fit alone (pilot rounds only), for inspection.
pub fn fit_adaptive_proposal<E: Executor>(
    cfg: &SirConfig,
    prior: &PriorSpec,
    dataset: &Dataset,
    series: &SeriesConfig,
    exec: &E,
) -> Result<AdaptiveFit> {
    cfg.validate()?;
    prior.validate()?;
    series.validate()?;
    proposal::fit_adaptive(&cfg.proposal, cfg.seed, prior, &LogLikelihood::new(dataset), series, exec)
}

fn draw_with<E: Executor>(
    cfg: &SirConfig,
    prior: &PriorSpec,
    lik: &LogLikelihood,
    series: &SeriesConfig,
    exec: &E,
) -> Result<(Vec<Drawn>, Option<AdaptiveFit>)> {
    let (proposal, fit) = proposal::build(&cfg.proposal, cfg.seed, prior, lik, series, exec)?;
    let seed = rng::derive_seed(cfg.seed, tags::CANDIDATES);
    Ok((proposal::draw_batch(&proposal, seed, cfg.n_c, exec), fit))
}

/// Step 2: `log w_i = log prior + log likelihood - log p_c`.
///
/// Candidates outside the support, or whose series fails to converge (orders
/// so small that the likelihood underflows anyway), get `-inf`.
pub fn compute_log_weights<E: Executor>(
    candidates: &[Candidate],
    dataset: &Dataset,
    prior: &PriorSpec,
    series: &SeriesConfig,
    exec: &E,
) -> Result<Vec<f64>> {
    if candidates.is_empty() {
        return Err(Error::TotalDegeneracy { candidates: 0 });
    }
    series.validate()?;
    let lik = LogLikelihood::new(dataset);
    let log_w =
        exec.map(candidates.len(), |i| log_weight(&candidates[i], posterior_with(&lik, &candidates[i].theta, prior, series)));
    check_degeneracy(log_w)
}

fn log_weight(c: &Candidate, log_posterior: Result<f64>) -> f64 {
    match log_posterior {
        Ok(lp) if lp.is_finite() && c.log_proposal.is_finite() => lp - c.log_proposal,
        _ => f64::NEG_INFINITY,
    }
}

/// Like `compute_log_weights`, reusing `SS(alpha)` where the draw kept it.
fn log_weights_with<E: Executor>(
    drawn: &[Drawn],
    lik: &LogLikelihood,
    prior: &PriorSpec,
    series: &SeriesConfig,
    exec: &E,
) -> Result<Vec<f64>> {
    let log_w = exec.map(drawn.len(), |i| {
        let Drawn { candidate: c, residual_ss } = &drawn[i];
        let log_posterior = match residual_ss {
            Some(ss) => {
                let lp = log_prior(&c.theta, prior);
                Ok(if lp == f64::NEG_INFINITY { lp } else { lp + lik.eval_from_ss(c.theta.sigma2, *ss) })
            }
            None => posterior_with(lik, &c.theta, prior, series),
        };
        log_weight(c, log_posterior)
    });
    check_degeneracy(log_w)
}

fn check_degeneracy(log_w: Vec<f64>) -> Result<Vec<f64>> {
    if log_w.iter().all(|w| *w == f64::NEG_INFINITY) {
        return Err(Error::TotalDegeneracy { candidates: log_w.len() });
    }
    Ok(log_w)
}

/// Step 3: `w*_i = exp(log w_i - M) / sum_j exp(log w_j - M)`, `M` the max.
pub fn normalize_weights(log_weights: &[f64]) -> Result<Vec<f64>> {
    let max = log_weights.iter().copied().filter(|w| !w.is_nan()).fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::TotalDegeneracy { candidates: log_weights.len() });
    }
    let scaled: Vec<f64> = log_weights.iter().map(|&lw| if lw.is_nan() { 0.0 } else { exp(lw - max) }).collect();
    let total: f64 = scaled.iter().sum();
    Ok(scaled.into_iter().map(|w| w / total).collect())
}

/// Step 4: `n_s` multinomial draws with replacement.
pub fn resample(candidates: &[Candidate], weights: &[f64], n_s: usize, seed: u64) -> Result<PosteriorSampleSet> {
    if n_s == 0 {
        return Err(Error::InvalidConfig { field: "sir.n_s", reason: "must be at least 1" });
    }
    if candidates.len() != weights.len() || candidates.is_empty() {
        return Err(Error::InvalidConfig { field: "weights", reason: "one weight per candidate required" });
    }
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for &w in weights {
        acc += w;
        cumulative.push(acc);
    }
    if !(acc > 0.0) {
        return Err(Error::TotalDegeneracy { candidates: candidates.len() });
    }
    let last_positive = weights.iter().rposition(|&w| w > 0.0).expect("positive total");
    let mut rng = rng::stream(rng::derive_seed(seed, tags::RESAMPLE), 0);
    let indices: Vec<usize> = (0..n_s)
        .map(|_| {
            let u = unit(&mut rng) * acc;
            cumulative.partition_point(|&c| c <= u).min(last_positive)
        })
        .collect();
    let samples = indices.iter().map(|&i| candidates[i].theta).collect();
    let distinct: BTreeSet<usize> = indices.iter().copied().collect();
    let diagnostics = SirDiagnostics {
        unique_fraction: distinct.len() as f64 / n_s as f64,
        ess: 1.0 / weights.iter().map(|w| w * w).sum::<f64>(),
        max_weight: weights.iter().copied().fold(0.0, f64::max),
        n_finite_weights: weights.iter().filter(|&&w| w > 0.0).count(),
    };
    Ok(PosteriorSampleSet { samples, indices, diagnostics })
}

/// Steps 1 to 4 end to end.
pub fn run_sir<E: Executor>(
    dataset: &Dataset,
    prior: &PriorSpec,
    cfg: &SirConfig,
    series: &SeriesConfig,
    exec: &E,
) -> Result<PosteriorSampleSet> {
    Ok(run_sir_detailed(dataset, prior, cfg, series, exec)?.posterior)
}

pub fn run_sir_detailed<E: Executor>(
    dataset: &Dataset,
    prior: &PriorSpec,
    cfg: &SirConfig,
    series: &SeriesConfig,
    exec: &E,
) -> Result<SirRun> {
    cfg.validate()?;
    prior.validate()?;
    series.validate()?;
    let lik = LogLikelihood::new(dataset);
    let (drawn, adaptive) = draw_with(cfg, prior, &lik, series, exec)?;
    let log_weights = log_weights_with(&drawn, &lik, prior, series, exec)?;
    let candidates: Vec<Candidate> = drawn.into_iter().map(|d| d.candidate).collect();
    let weights = normalize_weights(&log_weights)?;
    let mut posterior = resample(&candidates, &weights, cfg.n_s, cfg.seed)?;
    posterior.diagnostics.n_finite_weights = log_weights.iter().filter(|w| w.is_finite()).count();
    Ok(SirRun { candidates, log_weights, weights, posterior, adaptive })
}
