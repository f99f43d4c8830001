//! Priors, likelihood and unnormalized posterior for `theta = (alpha, sigma^2)`.
//!
//! Observations follow `ln p_i ~ Normal(ln mu_i(alpha), sigma^2)`: unit-median
//! multiplicative noise around the noiseless surface. Prior kernels drop their
//! normalizing constants; only density ratios are ever used.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::math::{log, log1p, square, LN_2PI};
use crate::series::{series_at_times, SeriesConfig};

/// A parameter point. Not validated: samplers may propose points outside the
/// support, which then carry zero prior mass.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Theta {
    pub alpha: f64,
    /// Noise variance on the log scale.
    pub sigma2: f64,
}

impl Theta {
    pub fn new(alpha: f64, sigma2: f64) -> Self {
        Theta { alpha, sigma2 }
    }

    pub fn sigma(&self) -> f64 {
        libm::sqrt(self.sigma2)
    }

    /// `0 < alpha < 1` and `sigma2 > 0`.
    pub fn in_support(&self) -> bool {
        self.alpha > 0.0 && self.alpha < 1.0 && self.sigma2 > 0.0 && self.sigma2.is_finite()
    }
}

/// `alpha ~ Beta(alpha_star, beta_star)`, `sigma^2 ~ chi^2(df)`.
///
/// With `sigma2_kernel = false` the `sigma^2` factor is dropped, i.e. a flat
/// (improper) prior on `sigma^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PriorSpec {
    pub alpha_star: f64,
    pub beta_star: f64,
    pub df: f64,
    pub sigma2_kernel: bool,
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec { alpha_star: 3.0, beta_star: 3.0, df: 1.0, sigma2_kernel: true }
    }
}

impl PriorSpec {
    pub fn beta(shape: f64) -> Self {
        PriorSpec { alpha_star: shape, beta_star: shape, ..PriorSpec::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.alpha_star) {
            return Err(Error::InvalidConfig { field: "prior.alpha_star", reason: "must be positive" });
        }
        if !positive(self.beta_star) {
            return Err(Error::InvalidConfig { field: "prior.beta_star", reason: "must be positive" });
        }
        if !positive(self.df) {
            return Err(Error::InvalidConfig { field: "prior.df", reason: "must be positive" });
        }
        Ok(())
    }
}

/// Log prior kernel; `-inf` outside the support.
///
/// `(a* - 1) ln a + (b* - 1) ln(1 - a) + (df/2 - 1) ln s2 - s2/2`.
pub fn log_prior(theta: &Theta, prior: &PriorSpec) -> f64 {
    if !theta.in_support() {
        return f64::NEG_INFINITY;
    }
    let a = theta.alpha;
    let mut lp = (prior.alpha_star - 1.0) * log(a) + (prior.beta_star - 1.0) * log1p(-a);
    if prior.sigma2_kernel {
        lp += (0.5 * prior.df - 1.0) * log(theta.sigma2) - 0.5 * theta.sigma2;
    }
    lp
}

/// One group of observations sharing a time coordinate.
#[derive(Clone, Debug)]
struct TimeGroup {
    t: f64,
    n: f64,
    /// Mean of `ln p_i + x_i` over the group.
    mean: f64,
    /// Sum of squared deviations of `ln p_i + x_i` from `mean`.
    within_ss: f64,
}

/// The log-likelihood of a fixed dataset, prepared for repeated evaluation.
///
/// Since `ln mu_i = -x_i + ln S(t_i)`, the residual `ln p_i - ln mu_i` is
/// `c_i - ln S(t_i)` with `c_i = ln p_i + x_i`. Grouping by `t` and
/// storing each group's mean and within-group sum of squares makes one
/// evaluation cost one series per distinct `t`, independent of the number of
/// observations.
#[derive(Clone, Debug)]
pub struct LogLikelihood {
    groups: Vec<TimeGroup>,
    times: Vec<f64>,
    n: f64,
    sum_ln_p: f64,
}

impl LogLikelihood {
    pub fn new(dataset: &Dataset) -> Self {
        let mut index: BTreeMap<u64, usize> = BTreeMap::new();
        let mut members: Vec<(f64, Vec<f64>)> = Vec::new();
        let mut sum_ln_p = 0.0;
        for obs in dataset.observations() {
            let ln_p = log(obs.p);
            sum_ln_p += ln_p;
            let slot = *index.entry(obs.t.to_bits()).or_insert_with(|| {
                members.push((obs.t, Vec::new()));
                members.len() - 1
            });
            members[slot].1.push(ln_p + obs.x);
        }
        let groups = members
            .into_iter()
            .map(|(t, cs)| {
                let n = cs.len() as f64;
                let mean = cs.iter().sum::<f64>() / n;
                let within_ss = cs.iter().map(|c| square(c - mean)).sum();
                TimeGroup { t, n, mean, within_ss }
            })
            .collect();
        let groups: Vec<TimeGroup> = groups;
        let times = groups.iter().map(|g| g.t).collect();
        LogLikelihood { groups, times, n: dataset.len() as f64, sum_ln_p }
    }

    pub fn n_observations(&self) -> usize {
        self.n as usize
    }

    /// Sum of squared log residuals at `alpha`.
    pub fn residual_ss(&self, alpha: f64, cfg: &SeriesConfig) -> Result<f64> {
        let mut factors = alloc::vec![0.0; self.times.len()];
        series_at_times(alpha, &self.times, cfg, &mut factors)?;
        let mut ss = 0.0;
        for (g, &s) in self.groups.iter().zip(&factors) {
            ss += g.within_ss + g.n * square(g.mean - log(s));
        }
        Ok(ss)
    }

    /// `-inf` for `sigma2 <= 0` or `alpha` outside `(0, 1]`.
    pub fn eval(&self, theta: &Theta, cfg: &SeriesConfig) -> Result<f64> {
        if !(theta.sigma2 > 0.0 && theta.sigma2.is_finite()) || !(theta.alpha > 0.0 && theta.alpha <= 1.0) {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(self.eval_from_ss(theta.sigma2, self.residual_ss(theta.alpha, cfg)?))
    }

    /// The log-likelihood given `SS(alpha)` already computed.
    pub(crate) fn eval_from_ss(&self, sigma2: f64, ss: f64) -> f64 {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return f64::NEG_INFINITY;
        }
        -ss / (2.0 * sigma2) - self.sum_ln_p - 0.5 * self.n * (log(sigma2) + LN_2PI)
    }
}

/// `sum_i [ -(ln p_i - ln mu_i)^2 / (2 s2) - ln p_i - ln(s2)/2 - ln(2 pi)/2 ]`.
pub fn log_likelihood(theta: &Theta, dataset: &Dataset, cfg: &SeriesConfig) -> Result<f64> {
    cfg.validate()?;
    LogLikelihood::new(dataset).eval(theta, cfg)
}

pub fn log_unnorm_posterior(theta: &Theta, dataset: &Dataset, prior: &PriorSpec, cfg: &SeriesConfig) -> Result<f64> {
    cfg.validate()?;
    posterior_with(&LogLikelihood::new(dataset), theta, prior, cfg)
}

pub(crate) fn posterior_with(lik: &LogLikelihood, theta: &Theta, prior: &PriorSpec, cfg: &SeriesConfig) -> Result<f64> {
    let lp = log_prior(theta, prior);
    if lp == f64::NEG_INFINITY {
        return Ok(lp);
    }
    Ok(lp + lik.eval(theta, cfg)?)
}
