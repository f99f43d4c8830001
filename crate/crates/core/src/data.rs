//! Observations, the space-time design and dataset simulation.

use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::math::exp;
use crate::rng;
use crate::series::{series_unchecked, EvalPoint, FractionalOrder, SeriesConfig};

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Observation {
    pub x: f64,
    pub t: f64,
    /// Observed pressure, strictly positive.
    pub p: f64,
}

impl Observation {
    pub fn validate(&self) -> Result<()> {
        EvalPoint { x: self.x, t: self.t }.validate()?;
        if !(self.p > 0.0 && self.p.is_finite()) {
            return Err(Error::Domain { what: "observed pressure", value: self.p });
        }
        Ok(())
    }

    pub fn point(&self) -> EvalPoint {
        EvalPoint { x: self.x, t: self.t }
    }
}

/// How a simulated dataset was produced.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Provenance {
    pub alpha_true: f64,
    pub sigma_true: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    observations: Vec<Observation>,
    pub provenance: Option<Provenance>,
}

impl Dataset {
    pub fn new(observations: Vec<Observation>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for obs in &observations {
            obs.validate()?;
        }
        Ok(Dataset { observations, provenance: None })
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Observations of `self` followed by those of `other`.
    pub fn concat(&self, other: &Dataset) -> Dataset {
        let mut observations = self.observations.clone();
        observations.extend_from_slice(&other.observations);
        Dataset { observations, provenance: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Axis {
    X,
    T,
}

impl Axis {
    pub fn label(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::T => "t",
        }
    }

    pub fn other(self) -> Axis {
        match self {
            Axis::X => Axis::T,
            Axis::T => Axis::X,
        }
    }
}

/// A rectangular design of equally spaced `x` and `t` levels.
///
/// A single level (`n = 1`) sits at the minimum and allows `min == max`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n_x: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub n_t: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { x_min: 0.01, x_max: 10.0, n_x: 31, t_min: 0.5, t_max: 1.5, n_t: 11 }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        check_axis(self.x_min, self.x_max, self.n_x, ["grid.x_min", "grid.x_max", "grid.n_x"])?;
        check_axis(self.t_min, self.t_max, self.n_t, ["grid.t_min", "grid.t_max", "grid.n_t"])
    }

    pub fn levels(&self, axis: Axis) -> Vec<f64> {
        match axis {
            Axis::X => levels(self.x_min, self.x_max, self.n_x),
            Axis::T => levels(self.t_min, self.t_max, self.n_t),
        }
    }

    pub fn len(&self) -> usize {
        self.n_x * self.n_t
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// First, middle and last level along `axis` (deduplicated).
    pub fn default_slices(&self, axis: Axis) -> Vec<f64> {
        let levels = self.levels(axis);
        let n = levels.len();
        let mut picks: Vec<f64> = [0, (n - 1) / 2, n - 1].iter().map(|&i| levels[i]).collect();
        picks.dedup();
        picks
    }

    pub fn contains(&self, axis: Axis, value: f64) -> bool {
        let (lo, hi) = match axis {
            Axis::X => (self.x_min, self.x_max),
            Axis::T => (self.t_min, self.t_max),
        };
        value >= lo && value <= hi
    }
}

fn check_axis(min: f64, max: f64, n: usize, fields: [&'static str; 3]) -> Result<()> {
    if !(min >= 0.0 && min.is_finite()) {
        return Err(Error::InvalidConfig { field: fields[0], reason: "must be finite and non-negative" });
    }
    if !max.is_finite() || max < min || (n > 1 && max == min) {
        return Err(Error::InvalidConfig { field: fields[1], reason: "must exceed the minimum" });
    }
    if n == 0 {
        return Err(Error::InvalidConfig { field: fields[2], reason: "must be at least 1" });
    }
    Ok(())
}

fn levels(min: f64, max: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return alloc::vec![min];
    }
    let step = (max - min) / (n - 1) as f64;
    (0..n).map(|i| if i == n - 1 { max } else { min + step * i as f64 }).collect()
}

/// All `n_x * n_t` design points, `x`-major.
pub fn make_grid(spec: &GridSpec) -> Result<Vec<EvalPoint>> {
    spec.validate()?;
    let ts = spec.levels(Axis::T);
    Ok(spec.levels(Axis::X).into_iter().flat_map(|x| ts.iter().map(move |&t| EvalPoint { x, t })).collect())
}

/// Noisy observations `p = mu(x, t; a) exp(sigma z)` on every grid point.
///
/// `z` for observation `i` is the first standard normal of stream
/// `(seed, i)`, so the noise is a pure function of the seed and the index.
pub fn simulate_dataset<E: Executor>(
    spec: &GridSpec,
    alpha: FractionalOrder,
    sigma: f64,
    seed: u64,
    cfg: &SeriesConfig,
    exec: &E,
) -> Result<Dataset> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Domain { what: "sigma", value: sigma });
    }
    cfg.validate()?;
    let points = make_grid(spec)?;
    let ts = spec.levels(Axis::T);
    let factors = ts.iter().map(|&t| series_unchecked(alpha.get(), t, cfg)).collect::<Result<Vec<_>>>()?;
    let n_t = ts.len();
    let observations = exec.map(points.len(), |i| {
        let EvalPoint { x, t } = points[i];
        let mu = exp(-x) * factors[i % n_t];
        let z: f64 = StandardNormal.sample(&mut rng::stream(seed, i as u64));
        Observation { x, t, p: mu * exp(sigma * z) }
    });
    Ok(Dataset::new(observations)?.with_provenance(Provenance { alpha_true: alpha.get(), sigma_true: sigma, seed }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::series::evaluate_pressure;
    use std::vec;

    #[test]
    fn two_point_grid() {
        let spec = GridSpec { x_min: 0.0, x_max: 1.0, n_x: 2, t_min: 1.0, t_max: 1.0, n_t: 1 };
        assert_eq!(make_grid(&spec).unwrap(), vec![EvalPoint { x: 0.0, t: 1.0 }, EvalPoint { x: 1.0, t: 1.0 }]);
    }

    #[test]
    fn default_grid_shape() {
        let grid = make_grid(&GridSpec::default()).unwrap();
        assert_eq!(grid.len(), 341);
        assert_eq!(grid[0].x, 0.01);
        assert_eq!(grid[340].x, 10.0);
        assert_eq!(grid[0].t, 0.5);
        assert_eq!(grid[10].t, 1.5);
        assert_eq!(grid[11].x, grid[0].x + (10.0 - 0.01) / 30.0);
    }

    #[test]
    fn single_x_level() {
        let spec = GridSpec { n_x: 1, ..GridSpec::default() };
        let grid = make_grid(&spec).unwrap();
        assert_eq!(grid.len(), 11);
        assert!(grid.iter().all(|p| p.x == 0.01));
    }

    #[test]
    fn invalid_grids() {
        let bad = [
            GridSpec { x_max: 0.001, ..GridSpec::default() },
            GridSpec { n_t: 0, ..GridSpec::default() },
            GridSpec { t_min: 1.5, ..GridSpec::default() },
            GridSpec { x_min: -1.0, ..GridSpec::default() },
        ];
        for spec in bad {
            assert!(matches!(make_grid(&spec), Err(Error::InvalidConfig { .. })), "{spec:?}");
        }
    }

    #[test]
    fn default_slices_pick_first_middle_last() {
        let spec = GridSpec::default();
        assert_eq!(spec.default_slices(Axis::T), vec![0.5, 1.0, 1.5]);
        let xs = spec.default_slices(Axis::X);
        assert_eq!(xs.len(), 3);
        assert_eq!(xs[0], 0.01);
        assert_eq!(xs[2], 10.0);
    }

    #[test]
    fn vanishing_noise_recovers_the_surface() {
        let cfg = SeriesConfig::default();
        let alpha = FractionalOrder::new(0.82).unwrap();
        let data = simulate_dataset(&GridSpec::default(), alpha, 1e-300, 1, &cfg, &Sequential).unwrap();
        for obs in data.observations() {
            assert_eq!(obs.p, evaluate_pressure(obs.point(), alpha, &cfg).unwrap());
        }
    }

    #[test]
    fn simulation_is_deterministic() {
        let cfg = SeriesConfig::default();
        let alpha = FractionalOrder::new(0.82).unwrap();
        let a = simulate_dataset(&GridSpec::default(), alpha, 0.1, 99, &cfg, &Sequential).unwrap();
        let b = simulate_dataset(&GridSpec::default(), alpha, 0.1, 99, &cfg, &Sequential).unwrap();
        assert_eq!(a, b);
        let c = simulate_dataset(&GridSpec::default(), alpha, 0.1, 100, &cfg, &Sequential).unwrap();
        assert_ne!(a, c);
        assert_eq!(a.provenance, Some(Provenance { alpha_true: 0.82, sigma_true: 0.1, seed: 99 }));
    }

    #[test]
    fn grids_share_leading_draws() {
        let cfg = SeriesConfig::default();
        let alpha = FractionalOrder::new(0.5).unwrap();
        let small = GridSpec { n_x: 1, ..GridSpec::default() };
        let a = simulate_dataset(&small, alpha, 0.1, 5, &cfg, &Sequential).unwrap();
        let b = simulate_dataset(&GridSpec::default(), alpha, 0.1, 5, &cfg, &Sequential).unwrap();
        assert_eq!(a.observations(), &b.observations()[..11]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(Dataset::new(vec![]), Err(Error::EmptyDataset));
        assert!(Dataset::new(vec![Observation { x: 0.0, t: 0.0, p: -1.0 }]).is_err());
        let alpha = FractionalOrder::new(0.5).unwrap();
        let cfg = SeriesConfig::default();
        assert!(simulate_dataset(&GridSpec::default(), alpha, 0.0, 1, &cfg, &Sequential).is_err());
    }
}
