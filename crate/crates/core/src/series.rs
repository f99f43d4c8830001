//! The closed-form pressure surface.
//!
//! `p(x, t) = e^{-x} S(t; a)` with `S(t; a) = sum_k 2 t^{ak} / Gamma(ak + 1)`,
//! twice a one-parameter Mittag-Leffler function evaluated at `t^a`. Terms
//! are formed in log space so neither `t^{ak}` nor `Gamma(ak + 1)` is ever
//! materialized.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{exp, log};
use crate::special::ln_gamma_pos;

/// The fractional order `a` of the time derivative, `0 < a <= 1`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "f64", into = "f64"))]
pub struct FractionalOrder(f64);

impl FractionalOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha <= 1.0 {
            Ok(FractionalOrder(alpha))
        } else {
            Err(Error::Domain { what: "fractional order", value: alpha })
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for FractionalOrder {
    type Error = Error;

    fn try_from(alpha: f64) -> Result<Self> {
        FractionalOrder::new(alpha)
    }
}

impl From<FractionalOrder> for f64 {
    fn from(alpha: FractionalOrder) -> f64 {
        alpha.0
    }
}

/// Truncation controls for the series.
///
/// Summation stops at the first `k >= k_min` whose term is below
/// `rel_tol` times the partial sum. For `t > 1` the leading terms grow before
/// the gamma function takes over, so `k_min` keeps the loop from exiting on
/// a small early term.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SeriesConfig {
    pub rel_tol: f64,
    pub k_min: usize,
    pub k_max: usize,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        SeriesConfig { rel_tol: 1e-14, k_min: 20, k_max: 10_000 }
    }
}

impl SeriesConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::InvalidConfig { field: "series.rel_tol", reason: "must be positive" });
        }
        if self.k_min == 0 || self.k_min >= self.k_max {
            return Err(Error::InvalidConfig { field: "series.k_min", reason: "need 0 < k_min < k_max" });
        }
        Ok(())
    }
}

/// A space-time coordinate, both non-negative.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalPoint {
    pub x: f64,
    pub t: f64,
}

impl EvalPoint {
    pub fn new(x: f64, t: f64) -> Result<Self> {
        let point = EvalPoint { x, t };
        point.validate()?;
        Ok(point)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x >= 0.0 && self.x.is_finite()) {
            return Err(Error::Domain { what: "x", value: self.x });
        }
        if !(self.t >= 0.0 && self.t.is_finite()) {
            return Err(Error::Domain { what: "t", value: self.t });
        }
        Ok(())
    }
}

/// `S(t; a) = sum_{k>=0} 2 t^{ak} / Gamma(ak + 1)`.
///
/// The `k = 0` term is 2 for every `t`, including `t = 0`.
pub fn series_factor(alpha: FractionalOrder, t: f64, cfg: &SeriesConfig) -> Result<f64> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain { what: "t", value: t });
    }
    cfg.validate()?;
    series_unchecked(alpha.get(), t, cfg)
}

pub(crate) fn series_unchecked(alpha: f64, t: f64, cfg: &SeriesConfig) -> Result<f64> {
    let mut out = [0.0];
    series_at_times(alpha, &[t], cfg, &mut out)?;
    Ok(out[0])
}

/// `S(t; a)` for several `t` at once.
///
/// `ln Gamma(ak + 1)` depends on `a` and `k` only, so it is computed once per
/// `k` and shared by every `t`. Each sum is formed exactly as a lone
/// evaluation would form it.
pub(crate) fn series_at_times(alpha: f64, ts: &[f64], cfg: &SeriesConfig, out: &mut [f64]) -> Result<()> {
    let mut ln_gammas: Vec<f64> = Vec::with_capacity(4 * cfg.k_min);
    for (&t, slot) in ts.iter().zip(out.iter_mut()) {
        *slot = series_with_table(alpha, t, cfg, &mut ln_gammas)?;
    }
    Ok(())
}

fn series_with_table(alpha: f64, t: f64, cfg: &SeriesConfig, ln_gammas: &mut Vec<f64>) -> Result<f64> {
    if t == 0.0 {
        return Ok(2.0);
    }
    let ln_t = log(t);
    let mut sum = 2.0;
    let mut term = 2.0;
    for k in 1..=cfg.k_max {
        let ak = alpha * k as f64;
        if ln_gammas.len() < k {
            ln_gammas.push(ln_gamma_pos(ak + 1.0));
        }
        term = 2.0 * exp(ak * ln_t - ln_gammas[k - 1]);
        sum += term;
        if k >= cfg.k_min && term < cfg.rel_tol * sum {
            return Ok(sum);
        }
        if !sum.is_finite() {
            return Err(Error::NonConvergence { partial_sum: sum, last_term: term, terms: k });
        }
    }
    Err(Error::NonConvergence { partial_sum: sum, last_term: term, terms: cfg.k_max })
}

/// `mu(x, t; a) = e^{-x} S(t; a)`.
pub fn evaluate_pressure(point: EvalPoint, alpha: FractionalOrder, cfg: &SeriesConfig) -> Result<f64> {
    point.validate()?;
    Ok(exp(-point.x) * series_factor(alpha, point.t, cfg)?)
}

/// The `|xs| x |ts|` surface, row `i` holding `x = xs[i]`.
///
/// The series runs once per `t` and the exponential once per `x`.
pub fn evaluate_surface(xs: &[f64], ts: &[f64], alpha: FractionalOrder, cfg: &SeriesConfig) -> Result<Vec<Vec<f64>>> {
    if xs.is_empty() || ts.is_empty() {
        return Err(Error::InvalidConfig { field: "surface", reason: "coordinate lists must be nonempty" });
    }
    for &x in xs {
        EvalPoint::new(x, 0.0)?;
    }
    let factors = ts.iter().map(|&t| series_factor(alpha, t, cfg)).collect::<Result<Vec<_>>>()?;
    Ok(xs
        .iter()
        .map(|&x| {
            let decay = exp(-x);
            factors.iter().map(|&s| decay * s).collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::vec;

    fn order(a: f64) -> FractionalOrder {
        FractionalOrder::new(a).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn t_zero_is_two() {
        let cfg = SeriesConfig::default();
        for a in [0.05, 0.5, 0.82, 1.0] {
            assert_eq!(series_factor(order(a), 0.0, &cfg).unwrap(), 2.0);
            assert_eq!(evaluate_pressure(EvalPoint::new(0.0, 0.0).unwrap(), order(a), &cfg).unwrap(), 2.0);
        }
    }

    #[test]
    fn alpha_one_is_twice_exp() {
        let cfg = SeriesConfig::default();
        let s = series_factor(order(1.0), 1.0, &cfg).unwrap();
        assert!(rel(s, 2.0 * core::f64::consts::E) < 1e-14);
        let p = evaluate_pressure(EvalPoint::new(1.0, 1.0).unwrap(), order(1.0), &cfg).unwrap();
        assert!(rel(p, 2.0) < 1e-14);
        let p = evaluate_pressure(EvalPoint::new(2.0, 0.5).unwrap(), order(1.0), &cfg).unwrap();
        assert!(rel(p, 0.446_260_320_296_859_64) < 1e-14, "{p}");
    }

    #[test]
    fn matches_high_precision_sums() {
        // Partial sums carried to 1e-40 in 50-digit arithmetic.
        let table = [
            (0.5, 1.0, 10.017960161524566933),
            (0.82, 0.5, 3.7877377713573832609),
            (0.82, 1.0, 6.4490004182940621026),
            (0.82, 1.5, 10.779732234128908865),
            (0.82, 2.0, 17.890769700378264206),
            (0.1, 0.5, 23.691175239540655516),
            (0.1, 1.0, 46.321069196226412843),
            (0.1, 1.5, 82.297808986972504838),
            (0.1, 2.0, 140.9304148258177976),
            (0.3, 1.0, 16.081351193934116021),
            (0.3, 2.0, 47.586875962350925404),
            (0.9, 0.5, 3.5450023866394730265),
            (0.9, 1.5, 9.8844140312665071095),
        ];
        let cfg = SeriesConfig::default();
        for (a, t, want) in table {
            let got = series_factor(order(a), t, &cfg).unwrap();
            assert!(rel(got, want) < 1e-12, "S({t}; {a}) = {got}, want {want}");
        }
    }

    #[test]
    fn half_order_erfc_identity() {
        let cfg = SeriesConfig::default();
        for i in 0..=200 {
            let t = 2.0 * i as f64 / 200.0;
            let want = 2.0 * exp(t) * crate::math::erfc(-libm::sqrt(t));
            let got = series_factor(order(0.5), t, &cfg).unwrap();
            assert!(rel(got, want) < 1e-10, "t = {t}");
        }
    }

    #[test]
    fn hits_k_max() {
        let cfg = SeriesConfig { rel_tol: 1e-14, k_min: 2, k_max: 5 };
        match series_factor(order(0.5), 1.0, &cfg) {
            Err(Error::NonConvergence { terms, partial_sum, last_term }) => {
                assert_eq!(terms, 5);
                assert!(partial_sum > 2.0 && last_term > 0.0);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn tiny_order_does_not_converge() {
        let err = series_factor(order(1e-4), 1.5, &SeriesConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }));
    }

    #[test]
    fn invalid_inputs() {
        assert!(FractionalOrder::new(0.0).is_err());
        assert!(FractionalOrder::new(1.0 + 1e-12).is_err());
        assert!(FractionalOrder::new(f64::NAN).is_err());
        assert!(EvalPoint::new(-1e-9, 0.0).is_err());
        assert!(EvalPoint::new(0.0, -1.0).is_err());
        let bad = SeriesConfig { k_min: 20, k_max: 20, ..SeriesConfig::default() };
        assert!(series_factor(order(0.5), 1.0, &bad).is_err());
        let bad = SeriesConfig { rel_tol: 0.0, ..SeriesConfig::default() };
        assert!(series_factor(order(0.5), 1.0, &bad).is_err());
    }

    #[test]
    fn surface_small_cases() {
        let cfg = SeriesConfig::default();
        assert_eq!(evaluate_surface(&[0.0], &[0.0], order(0.3), &cfg).unwrap(), vec![vec![2.0]]);
        let s = evaluate_surface(&[0.0, 1.0], &[1.0], order(1.0), &cfg).unwrap();
        assert!(rel(s[0][0], 2.0 * core::f64::consts::E) < 1e-14);
        assert!(rel(s[1][0], 2.0) < 1e-14);
        assert!(evaluate_surface(&[], &[1.0], order(1.0), &cfg).is_err());
    }

    #[test]
    fn surface_equals_pointwise_bitwise() {
        let cfg = SeriesConfig::default();
        let xs: Vec<f64> = (0..31).map(|i| 0.01 + (10.0 - 0.01) * i as f64 / 30.0).collect();
        let ts: Vec<f64> = (0..11).map(|j| 0.5 + j as f64 / 10.0).collect();
        let alpha = order(0.82);
        let surface = evaluate_surface(&xs, &ts, alpha, &cfg).unwrap();
        for (i, &x) in xs.iter().enumerate() {
            for (j, &t) in ts.iter().enumerate() {
                let p = evaluate_pressure(EvalPoint::new(x, t).unwrap(), alpha, &cfg).unwrap();
                assert_eq!(surface[i][j].to_bits(), p.to_bits());
            }
        }
    }
}
