//! Posterior summaries and the posterior predictive distribution.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};

use crate::data::{Axis, Dataset, GridSpec};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::math::{exp, log, sqrt};
use crate::model::Theta;
use crate::rng::{self, tags};
use crate::series::{series_at_times, EvalPoint, SeriesConfig};

/// Sample quantile with linear interpolation between order statistics
/// (`h = (n - 1) q`, Hyndman-Fan type 7).
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, q)
}

/// [`quantile`] on data already sorted ascending.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::EmptySamples);
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Domain { what: "quantile level", value: q });
    }
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h as usize;
    let frac = h - lo as f64;
    if lo + 1 >= sorted.len() || frac == 0.0 {
        return Ok(sorted[lo]);
    }
    Ok(sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]))
}

/// Central interval between the `(1 - level)/2` and `1 - (1 - level)/2` quantiles.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CredibleInterval {
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
}

impl CredibleInterval {
    pub fn contains(&self, value: f64) -> bool {
        self.lo <= value && value <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// `level = 0` collapses both ends onto the median.
pub fn credible_interval(samples: &[f64], level: f64) -> Result<CredibleInterval> {
    if !(0.0..1.0).contains(&level) {
        return Err(Error::Domain { what: "credible level", value: level });
    }
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tail = 0.5 * (1.0 - level);
    Ok(CredibleInterval { lo: quantile_sorted(&sorted, tail)?, hi: quantile_sorted(&sorted, 1.0 - tail)?, level })
}

/// Draws from the posterior predictive at each point.
///
/// For every posterior sample `theta_j` and every point, `draws_per_sample`
/// values `mu(x, t; alpha_j) exp(sigma_j z)` with fresh standard normals `z`.
/// Point `i` uses stream `(seed', i)` and consumes it in `(sample, draw)`
/// order. Entry `i` of the result holds `samples.len() * draws_per_sample`
/// values, sample-major.
pub fn posterior_predictive<E: Executor>(
    samples: &[Theta],
    points: &[EvalPoint],
    draws_per_sample: usize,
    seed: u64,
    cfg: &SeriesConfig,
    exec: &E,
) -> Result<Vec<Vec<f64>>> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if draws_per_sample == 0 {
        return Err(Error::InvalidConfig { field: "draws_per_sample", reason: "must be at least 1" });
    }
    cfg.validate()?;
    for p in points {
        p.validate()?;
    }
    for s in samples {
        if !(s.alpha > 0.0 && s.alpha <= 1.0) {
            return Err(Error::Domain { what: "posterior alpha", value: s.alpha });
        }
        if !(s.sigma2 >= 0.0 && s.sigma2.is_finite()) {
            return Err(Error::Domain { what: "posterior sigma2", value: s.sigma2 });
        }
    }

    // ln S(t; alpha_j) for every distinct t, sample-major
    let mut t_slot: BTreeMap<u64, usize> = BTreeMap::new();
    let mut ts = Vec::new();
    let slots: Vec<usize> = points
        .iter()
        .map(|p| {
            *t_slot.entry(p.t.to_bits()).or_insert_with(|| {
                ts.push(p.t);
                ts.len() - 1
            })
        })
        .collect();
    let ln_factors = exec.map(samples.len(), |j| {
        let mut factors = alloc::vec![0.0; ts.len()];
        series_at_times(samples[j].alpha, &ts, cfg, &mut factors)?;
        Ok(factors.into_iter().map(log).collect::<Vec<f64>>())
    });
    let ln_factors = ln_factors.into_iter().collect::<Result<Vec<_>>>()?;
    let sigmas: Vec<f64> = samples.iter().map(|s| sqrt(s.sigma2)).collect();

    let seed = rng::derive_seed(seed, tags::PREDICT);
    Ok(exec.map(points.len(), |i| {
        let mut rng = rng::stream(seed, i as u64);
        let (x, slot) = (points[i].x, slots[i]);
        let mut out = Vec::with_capacity(samples.len() * draws_per_sample);
        for (j, &sigma) in sigmas.iter().enumerate() {
            let ln_mu = ln_factors[j][slot] - x;
            for _ in 0..draws_per_sample {
                let z: f64 = StandardNormal.sample(&mut rng);
                out.push(exp(ln_mu + sigma * z));
            }
        }
        out
    }))
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProfilePoint {
    pub coord: f64,
    pub q025: f64,
    pub q50: f64,
    pub q975: f64,
}

/// Predictive quantile curves along one grid line.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PredictiveProfile {
    pub fixed: Axis,
    pub fixed_value: f64,
    pub points: Vec<ProfilePoint>,
}

/// One profile per slice value: `fixed` held at the value, the other
/// coordinate running over its grid levels.
#[allow(clippy::too_many_arguments)]
pub fn predictive_profiles<E: Executor>(
    samples: &[Theta],
    spec: &GridSpec,
    slice_values: &[f64],
    fixed: Axis,
    draws_per_sample: usize,
    seed: u64,
    cfg: &SeriesConfig,
    exec: &E,
) -> Result<Vec<PredictiveProfile>> {
    spec.validate()?;
    let free = spec.levels(fixed.other());
    let mut profiles = Vec::with_capacity(slice_values.len());
    for (k, &value) in slice_values.iter().enumerate() {
        if !spec.contains(fixed, value) {
            return Err(Error::Domain { what: "slice value outside the grid", value });
        }
        let points: Vec<EvalPoint> = free
            .iter()
            .map(|&c| match fixed {
                Axis::X => EvalPoint { x: value, t: c },
                Axis::T => EvalPoint { x: c, t: value },
            })
            .collect();
        let slice_seed = rng::derive_seed(seed, ((fixed as u64) << 32) | k as u64);
        let draws = posterior_predictive(samples, &points, draws_per_sample, slice_seed, cfg, exec)?;
        let curve = free
            .iter()
            .zip(draws)
            .map(|(&coord, mut values)| {
                values.sort_by(f64::total_cmp);
                Ok(ProfilePoint {
                    coord,
                    q025: quantile_sorted(&values, 0.025)?,
                    q50: quantile_sorted(&values, 0.5)?,
                    q975: quantile_sorted(&values, 0.975)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        profiles.push(PredictiveProfile { fixed, fixed_value: value, points: curve });
    }
    Ok(profiles)
}

/// Fraction of observations inside their pointwise central predictive
/// interval at `level`.
pub fn predictive_coverage<E: Executor>(
    samples: &[Theta],
    dataset: &Dataset,
    level: f64,
    draws_per_sample: usize,
    seed: u64,
    cfg: &SeriesConfig,
    exec: &E,
) -> Result<f64> {
    let points: Vec<EvalPoint> = dataset.observations().iter().map(|o| o.point()).collect();
    let draws = posterior_predictive(samples, &points, draws_per_sample, seed, cfg, exec)?;
    let mut inside = 0usize;
    for (obs, values) in dataset.observations().iter().zip(&draws) {
        if credible_interval(values, level)?.contains(obs.p) {
            inside += 1;
        }
    }
    Ok(inside as f64 / dataset.len() as f64)
}
