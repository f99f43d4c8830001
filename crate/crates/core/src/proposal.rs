//! Candidate distributions for importance sampling.
//!
//! Three proposals are available:
//!
//! * `Prior`: draws from `Beta(a*, b*) x chi^2(df)`.
//! * `UniformBox`: uniform over a rectangle in `(alpha, sigma^2)`.
//! * `AdaptivePilot`: a normal on `logit alpha` fitted to the posterior by a
//!   short sequence of pilot rounds and widened by `inflation`,
//!   with `ln sigma^2` drawn given `alpha` from a normal placed at the
//!   conditional posterior mode.
//!
//! Given `alpha`, the posterior in `sigma^2` depends on the data only through
//! `SS(alpha)`, the sum of squared log residuals. When the noise is small the
//! joint posterior is a thin curved ridge `sigma^2 ~ SS(alpha)/n` that no
//! fixed normal in `(alpha, sigma^2)` can follow; drawing `sigma^2` given
//! `alpha` follows it exactly.
//!
//! The adaptive fit works on the marginal posterior of `u = logit alpha`,
//! with `sigma^2` integrated out by a Laplace approximation. A pilot of
//! `pilot_size` prior draws locates the highest marginal; a golden section
//! search refines it and a finite-difference curvature gives a first normal.
//! Pilot rounds then draw from that normal, weight against the exact
//! posterior and replace it by the weighted mean and variance until the
//! effective sample size reaches half the pilot size. With hundreds of
//! observations the posterior is orders of magnitude narrower than the
//! prior, so drawing straight from the prior would put all the weight on a
//! handful of points.

use alloc::vec::Vec;

use rand_core::RngCore;
use rand_distr::{Beta, ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::math::{exp, log, log1p, softplus, sqrt, square, LN_SQRT_2PI};
use crate::model::{log_prior, LogLikelihood, PriorSpec, Theta};
use crate::rng::{self, tags};
use crate::series::SeriesConfig;
use crate::special::{ln_beta, ln_gamma_pos};

/// Pilot rounds allowed before the adaptive fit gives up.
pub const MAX_PILOT_ROUNDS: usize = 60;
/// Fewer finite-weight pilot candidates than this is a degenerate pilot.
pub const MIN_FINITE_PILOT: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ProposalKind {
    #[cfg_attr(feature = "serde", serde(alias = "Prior"))]
    Prior,
    #[cfg_attr(feature = "serde", serde(alias = "UniformBox"))]
    UniformBox,
    #[cfg_attr(feature = "serde", serde(alias = "AdaptivePilot"))]
    AdaptivePilot,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ProposalBox {
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub sigma2_lo: f64,
    pub sigma2_hi: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ProposalSpec {
    pub kind: ProposalKind,
    #[cfg_attr(feature = "serde", serde(rename = "box"))]
    pub bounds: Option<ProposalBox>,
    pub pilot_size: usize,
    pub inflation: f64,
}

impl Default for ProposalSpec {
    fn default() -> Self {
        ProposalSpec { kind: ProposalKind::AdaptivePilot, bounds: None, pilot_size: 2000, inflation: 2.0 }
    }
}

impl ProposalSpec {
    pub fn prior() -> Self {
        ProposalSpec { kind: ProposalKind::Prior, ..ProposalSpec::default() }
    }

    pub fn uniform_box(bounds: ProposalBox) -> Self {
        ProposalSpec { kind: ProposalKind::UniformBox, bounds: Some(bounds), ..ProposalSpec::default() }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.kind, &self.bounds) {
            (ProposalKind::UniformBox, None) => {
                return Err(Error::InvalidConfig { field: "proposal.box", reason: "required for a uniform box proposal" })
            }
            (ProposalKind::UniformBox, Some(b)) => {
                if !(b.alpha_lo >= 0.0 && b.alpha_lo < b.alpha_hi && b.alpha_hi <= 1.0) {
                    return Err(Error::InvalidConfig {
                        field: "proposal.box.alpha_lo",
                        reason: "need 0 <= alpha_lo < alpha_hi <= 1",
                    });
                }
                if !(b.sigma2_lo >= 0.0 && b.sigma2_lo < b.sigma2_hi && b.sigma2_hi.is_finite()) {
                    return Err(Error::InvalidConfig {
                        field: "proposal.box.sigma2_lo",
                        reason: "need 0 <= sigma2_lo < sigma2_hi < inf",
                    });
                }
            }
            (_, Some(_)) => {
                return Err(Error::InvalidConfig { field: "proposal.box", reason: "only allowed for a uniform box proposal" })
            }
            (_, None) => {}
        }
        if self.pilot_size < 100 {
            return Err(Error::InvalidConfig { field: "proposal.pilot_size", reason: "must be at least 100" });
        }
        if !(self.inflation >= 1.0 && self.inflation.is_finite()) {
            return Err(Error::InvalidConfig { field: "proposal.inflation", reason: "must be at least 1" });
        }
        Ok(())
    }
}

/// A candidate and the log density of the proposal that produced it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Candidate {
    pub theta: Theta,
    pub log_proposal: f64,
}

/// Outcome of the pilot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptiveFit {
    /// Weighted mean of `logit alpha` in the final round.
    pub logit_mean: f64,
    /// Weighted variance of `logit alpha`, before inflation.
    pub logit_var: f64,
    /// Importance-weighted mean of `alpha` in the final round.
    pub alpha_mean: f64,
    /// Effective sample size of the final round.
    pub ess: f64,
    pub rounds: usize,
}

/// A drawn candidate, with `SS(alpha)` when drawing needed it.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Drawn {
    pub candidate: Candidate,
    pub residual_ss: Option<f64>,
}

impl Drawn {
    fn plain(candidate: Candidate) -> Self {
        Drawn { candidate, residual_ss: None }
    }
}

#[derive(Clone, Debug)]
pub(crate) enum Proposal<'a> {
    Prior(PriorSampler),
    Box(ProposalBox),
    Conditional(ConditionalProposal<'a>),
}

impl Proposal<'_> {
    pub(crate) fn draw<R: RngCore>(&self, rng: &mut R) -> Drawn {
        match self {
            Proposal::Prior(p) => Drawn::plain(p.draw(rng)),
            Proposal::Box(b) => {
                let alpha = b.alpha_lo + (b.alpha_hi - b.alpha_lo) * unit(rng);
                let sigma2 = b.sigma2_lo + (b.sigma2_hi - b.sigma2_lo) * unit(rng);
                let log_proposal = -log((b.alpha_hi - b.alpha_lo) * (b.sigma2_hi - b.sigma2_lo));
                Drawn::plain(Candidate { theta: Theta { alpha, sigma2 }, log_proposal })
            }
            Proposal::Conditional(c) => c.draw(rng),
        }
    }
}

/// Uniform on `[0, 1)` with 53 random bits.
pub(crate) fn unit<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[derive(Clone, Debug)]
pub(crate) struct PriorSampler {
    beta: Beta<f64>,
    chi2: ChiSquared<f64>,
    spec: PriorSpec,
    ln_norm: f64,
}

impl PriorSampler {
    pub(crate) fn new(spec: &PriorSpec) -> Result<Self> {
        spec.validate()?;
        let beta = Beta::new(spec.alpha_star, spec.beta_star)
            .map_err(|_| Error::InvalidConfig { field: "prior", reason: "invalid beta shape" })?;
        let chi2 = ChiSquared::new(spec.df).map_err(|_| Error::InvalidConfig { field: "prior.df", reason: "invalid df" })?;
        let half_df = 0.5 * spec.df;
        let ln_norm = ln_beta(spec.alpha_star, spec.beta_star) + half_df * core::f64::consts::LN_2 + ln_gamma_pos(half_df);
        Ok(PriorSampler { beta, chi2, spec: *spec, ln_norm })
    }

    /// Normalized log density of `Beta(a*, b*) x chi^2(df)`.
    pub(crate) fn log_density(&self, theta: &Theta) -> f64 {
        if !theta.in_support() {
            return f64::NEG_INFINITY;
        }
        let s = &self.spec;
        (s.alpha_star - 1.0) * log(theta.alpha)
            + (s.beta_star - 1.0) * log1p(-theta.alpha)
            + (0.5 * s.df - 1.0) * log(theta.sigma2)
            - 0.5 * theta.sigma2
            - self.ln_norm
    }

    fn draw<R: RngCore>(&self, rng: &mut R) -> Candidate {
        let theta = Theta { alpha: self.beta.sample(rng), sigma2: self.chi2.sample(rng) };
        Candidate { theta, log_proposal: self.log_density(&theta) }
    }
}

/// Variance factor applied to the conditional normal for `ln sigma^2`.
const CONDITIONAL_WIDENING: f64 = 2.0;

/// `logit alpha ~ N(mean, sd^2)`, then `ln sigma^2 | alpha` normal at the
/// mode of the conditional posterior, with variance
/// `CONDITIONAL_WIDENING` times the inverse curvature there.
///
/// In `v = ln sigma^2` the conditional is
/// `c v - d e^v - n v / 2 - SS e^{-v} / 2`, where the prior is
/// `sigma^2^{c-1} e^{-d sigma^2}` in `sigma^2`. Its mode `y = e^v` solves a
/// quadratic.
#[derive(Clone, Debug)]
pub(crate) struct ConditionalProposal<'a> {
    mean: f64,
    sd: f64,
    c: f64,
    d: f64,
    lik: &'a LogLikelihood,
    series: &'a SeriesConfig,
}

impl<'a> ConditionalProposal<'a> {
    pub(crate) fn new(mean: f64, var: f64, prior: &PriorSpec, lik: &'a LogLikelihood, series: &'a SeriesConfig) -> Option<Self> {
        if !(mean.is_finite() && var > 0.0 && var.is_finite()) {
            return None;
        }
        let (c, d) = if prior.sigma2_kernel { (0.5 * prior.df, 0.5) } else { (1.0, 0.0) };
        Some(ConditionalProposal { mean, sd: sqrt(var), c, d, lik, series })
    }

    fn conditional(&self, ss: f64) -> Option<(f64, f64)> {
        conditional_mode(self.c, self.d, self.lik.n_observations() as f64, ss)
            .map(|(centre, curvature)| (centre, CONDITIONAL_WIDENING / curvature))
    }

    fn draw<R: RngCore>(&self, rng: &mut R) -> Drawn {
        let z: f64 = StandardNormal.sample(rng);
        let z2: f64 = StandardNormal.sample(rng);
        let u = self.mean + self.sd * z;
        let alpha = 1.0 / (1.0 + exp(-u));
        let invalid = Drawn::plain(Candidate { theta: Theta { alpha, sigma2: 1.0 }, log_proposal: f64::NAN });
        // ln alpha = -softplus(-u), ln(1 - alpha) = -softplus(u)
        let log_q_alpha = -LN_SQRT_2PI - log(self.sd) - 0.5 * z * z + softplus(-u) + softplus(u);
        let Ok(ss) = self.lik.residual_ss(alpha, self.series) else { return invalid };
        let Some((centre, var)) = self.conditional(ss) else { return invalid };
        let sd = sqrt(var);
        let v = centre + sd * z2;
        let log_q_sigma2 = -LN_SQRT_2PI - log(sd) - 0.5 * z2 * z2 - v;
        let candidate = Candidate { theta: Theta { alpha, sigma2: exp(v) }, log_proposal: log_q_alpha + log_q_sigma2 };
        Drawn { candidate, residual_ss: Some(ss) }
    }
}

/// Mode `ln y` and curvature of
/// `c v - d e^v - n v / 2 - SS e^{-v} / 2` in `v`.
fn conditional_mode(c: f64, mut d: f64, n: f64, ss: f64) -> Option<(f64, f64)> {
    let half_lss = 0.5 * ss;
    let b = c - 0.5 * n;
    // d y^2 - b y - half_lss = 0, rationalized for d = 0
    let mut denom = -b + sqrt(b * b + 4.0 * d * half_lss);
    if !(denom > 0.0) {
        // improper under a flat prior with too few observations; any finite centre will do
        d = 0.5;
        denom = -b + sqrt(b * b + 4.0 * d * half_lss);
    }
    let y = 2.0 * half_lss / denom;
    let curvature = d * y + half_lss / y;
    (y > 0.0 && y.is_finite() && curvature > 0.0 && curvature.is_finite()).then(|| (log(y), curvature))
}

pub(crate) fn logit(alpha: f64) -> f64 {
    log(alpha) - log1p(-alpha)
}

/// Effective sample size `(sum w)^2 / sum w^2` of unnormalized log weights.
pub(crate) fn ess_of_log_weights(log_w: &[f64]) -> f64 {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return 0.0;
    }
    let (mut s1, mut s2) = (0.0, 0.0);
    for &lw in log_w {
        let w = exp(lw - max);
        s1 += w;
        s2 += w * w;
    }
    s1 * s1 / s2
}

pub(crate) fn draw_batch<E: Executor>(proposal: &Proposal<'_>, seed: u64, n: usize, exec: &E) -> Vec<Drawn> {
    exec.map(n, |i| proposal.draw(&mut rng::stream(seed, i as u64)))
}

/// Log marginal posterior density of `u = logit alpha`, up to a constant,
/// with `sigma^2` integrated out by a Laplace approximation.
struct Marginal<'a> {
    prior: PriorSpec,
    c: f64,
    d: f64,
    lik: &'a LogLikelihood,
    series: &'a SeriesConfig,
}

impl Marginal<'_> {
    fn eval(&self, u: f64) -> f64 {
        let (ln_a, ln_1ma) = (-softplus(-u), -softplus(u));
        let alpha = exp(ln_a);
        if !(alpha > 0.0 && alpha < 1.0) {
            return f64::NEG_INFINITY;
        }
        let Ok(ss) = self.lik.residual_ss(alpha, self.series) else { return f64::NEG_INFINITY };
        let n = self.lik.n_observations() as f64;
        let Some((v, curvature)) = conditional_mode(self.c, self.d, n, ss) else { return f64::NEG_INFINITY };
        let f = (self.c - 0.5 * n) * v - self.d * exp(v) - 0.5 * ss * exp(-v);
        self.prior.alpha_star * ln_a + self.prior.beta_star * ln_1ma + f - 0.5 * log(curvature)
    }
}

/// Maximizer of `f` on `[lo, hi]` by golden section search.
fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    const R: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - R * (hi - lo);
    let mut x2 = lo + R * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if hi - lo <= 1e-12 * (1.0 + lo.abs()) {
            break;
        }
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - R * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + R * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        x1
    } else {
        x2
    }
}

/// Variance of the normal matching the curvature of `f` at its maximum `m`.
///
/// The step is rescaled until the drop over it is about one half, where a
/// central difference is accurate for any smooth peak.
fn curvature_variance<F: Fn(f64) -> f64>(f: F, m: f64, fallback: f64) -> f64 {
    let f0 = f(m);
    let mut h = sqrt(fallback);
    for _ in 0..40 {
        let drop = f0 - 0.5 * (f(m - h) + f(m + h));
        if drop.is_finite() && drop > 0.0 {
            if (0.25..=1.0).contains(&drop) {
                return 0.5 * h * h / drop;
            }
            h *= sqrt(0.5 / drop).clamp(1e-3, 1e3);
        } else if drop.is_finite() {
            h *= 10.0;
        } else {
            h *= 0.1;
        }
    }
    fallback
}

/// Runs the pilot.
pub(crate) fn fit_adaptive<E: Executor>(
    spec: &ProposalSpec,
    seed: u64,
    prior: &PriorSpec,
    lik: &LogLikelihood,
    series: &SeriesConfig,
    exec: &E,
) -> Result<AdaptiveFit> {
    let pilot_seed = rng::derive_seed(seed, tags::PILOT);
    let target = 0.5 * spec.pilot_size as f64;
    let (c, d) = if prior.sigma2_kernel { (0.5 * prior.df, 0.5) } else { (1.0, 0.0) };
    let marginal = Marginal { prior: *prior, c, d, lik, series };

    let beta = Beta::new(prior.alpha_star, prior.beta_star)
        .map_err(|_| Error::InvalidConfig { field: "prior", reason: "invalid beta shape" })?;
    let mut scouts: Vec<(f64, f64)> = exec.map(spec.pilot_size, |i| {
        let alpha: f64 = beta.sample(&mut rng::stream(pilot_seed, i as u64));
        let u = logit(alpha);
        (u, if u.is_finite() { marginal.eval(u) } else { f64::NEG_INFINITY })
    });
    let finite = scouts.iter().filter(|s| s.1.is_finite()).count();
    if finite < MIN_FINITE_PILOT {
        return Err(Error::DegeneratePilot { finite, pilot_size: spec.pilot_size });
    }
    scouts.retain(|s| s.1.is_finite());
    scouts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let best = (0..scouts.len()).fold(0, |b, i| if scouts[i].1 > scouts[b].1 { i } else { b });
    let lo = if best > 0 { scouts[best - 1].0 } else { scouts[best].0 - 1.0 };
    let hi = if best + 1 < scouts.len() { scouts[best + 1].0 } else { scouts[best].0 + 1.0 };
    let f = |u: f64| marginal.eval(u);
    let mut mean = golden_max(f, lo, hi);
    let mut var = curvature_variance(f, mean, square((hi - lo) / 4.0));

    let mut ess = 0.0;
    for round in 1..=MAX_PILOT_ROUNDS {
        let q = ConditionalProposal::new(mean, spec.inflation * var, prior, lik, series)
            .ok_or(Error::DegeneratePilot { finite, pilot_size: spec.pilot_size })?;
        let draws = draw_batch(&Proposal::Conditional(q), rng::derive_seed(pilot_seed, round as u64), spec.pilot_size, exec);
        let log_w: Vec<f64> = exec.map(draws.len(), |i| {
            let Drawn { candidate: c, residual_ss } = draws[i];
            let lp = log_prior(&c.theta, prior);
            match residual_ss {
                Some(ss) if lp.is_finite() && c.log_proposal.is_finite() => {
                    lp + lik.eval_from_ss(c.theta.sigma2, ss) - c.log_proposal
                }
                _ => f64::NEG_INFINITY,
            }
        });
        let us: Vec<f64> = draws.iter().map(|d| logit(d.candidate.theta.alpha)).collect();
        let alphas: Vec<f64> = draws.iter().map(|d| d.candidate.theta.alpha).collect();
        let finite = log_w.iter().filter(|w| w.is_finite()).count();
        if finite < MIN_FINITE_PILOT {
            return Err(Error::DegeneratePilot { finite, pilot_size: spec.pilot_size });
        }
        ess = ess_of_log_weights(&log_w);
        let (m, v, alpha_mean) = weighted_moments(&us, &alphas, &log_w);
        if ess >= target {
            return Ok(AdaptiveFit { logit_mean: m, logit_var: v, alpha_mean, ess, rounds: round });
        }
        if v > 0.0 && v.is_finite() {
            mean = m;
            var = v;
        } else {
            var *= 4.0;
        }
    }
    Err(Error::PilotStalled { rounds: MAX_PILOT_ROUNDS, ess })
}

/// Weighted mean and variance of `us`, and the weighted mean of `alphas`.
fn weighted_moments(us: &[f64], alphas: &[f64], log_w: &[f64]) -> (f64, f64, f64) {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|&lw| exp(lw - max)).collect();
    let total: f64 = w.iter().sum();
    let (mut mean, mut alpha_mean) = (0.0, 0.0);
    for i in 0..w.len() {
        if w[i] > 0.0 {
            mean += w[i] * us[i];
            alpha_mean += w[i] * alphas[i];
        }
    }
    mean /= total;
    alpha_mean /= total;
    let mut var = 0.0;
    for i in 0..w.len() {
        if w[i] > 0.0 {
            var += w[i] * square(us[i] - mean);
        }
    }
    (mean, var / total, alpha_mean)
}

/// The proposal `spec` describes, fitted if adaptive.
pub(crate) fn build<'a, E: Executor>(
    spec: &ProposalSpec,
    seed: u64,
    prior: &PriorSpec,
    lik: &'a LogLikelihood,
    series: &'a SeriesConfig,
    exec: &E,
) -> Result<(Proposal<'a>, Option<AdaptiveFit>)> {
    spec.validate()?;
    match spec.kind {
        ProposalKind::Prior => Ok((Proposal::Prior(PriorSampler::new(prior)?), None)),
        ProposalKind::UniformBox => Ok((Proposal::Box(spec.bounds.expect("validated")), None)),
        ProposalKind::AdaptivePilot => {
            let fit = fit_adaptive(spec, seed, prior, lik, series, exec)?;
            let conditional = ConditionalProposal::new(fit.logit_mean, spec.inflation * fit.logit_var, prior, lik, series)
                .ok_or(Error::DegeneratePilot { finite: 0, pilot_size: spec.pilot_size })?;
            Ok((Proposal::Conditional(conditional), Some(fit)))
        }
    }
}
