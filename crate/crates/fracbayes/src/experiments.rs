//! Simulation studies: robustness over a grid of true values, sensitivity to
//! the prior on alpha, and frequentist coverage of the credible intervals.
//!
//! Every fit is keyed by `(cell, replicate)`. Its dataset seed is
//! `replicate_seed(base_seed, cell, replicate)` and its sampler seed is
//! derived from that, so results do not depend on scheduling. Fits run in
//! parallel on the given executor, each one sequential inside. A fit that
//! fails is recorded with its error and counts as not containing the truth.

use std::path::Path;

use fracbayes_core::rng::{derive_seed, replicate_seed};
use fracbayes_core::{
    credible_interval, run_sir, simulate_dataset, CredibleInterval, Dataset, Executor, FractionalOrder, GridSpec, PriorSpec,
    Sequential, SeriesConfig, SirConfig, SirDiagnostics,
};
use serde::{Deserialize, Serialize};

use crate::config::{CoverageConfig, PriorSensitivityConfig, RobustnessConfig};
use crate::error::Result;
use crate::io::{create_file, fmt_real, write_csv, write_json};

/// Tag mixing a dataset seed into its sampler seed.
const FIT_TAG: u64 = 0x5349_5246;

pub const LEVEL: f64 = 0.95;

/// Outcome of fitting one simulated dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub alpha_true: f64,
    pub sigma_true: f64,
    /// Seed the dataset was simulated from.
    pub seed: u64,
    pub ci_alpha: Option<CredibleInterval>,
    /// Interval for `sigma = sqrt(sigma^2)`.
    pub ci_sigma: Option<CredibleInterval>,
    pub contains_alpha: bool,
    pub contains_sigma: bool,
    pub diagnostics: Option<SirDiagnostics>,
    pub error: Option<String>,
}

impl FitRecord {
    fn new(alpha_true: f64, sigma_true: f64, seed: u64) -> Self {
        FitRecord {
            alpha_true,
            sigma_true,
            seed,
            ci_alpha: None,
            ci_sigma: None,
            contains_alpha: false,
            contains_sigma: false,
            diagnostics: None,
            error: None,
        }
    }

    pub fn failed(&self) -> bool {
        self.error.is_some()
    }

    pub fn alpha_width(&self) -> Option<f64> {
        self.ci_alpha.map(|ci| ci.width())
    }

    const COLUMNS: [&'static str; 12] = [
        "alpha_true",
        "sigma_true",
        "seed",
        "alpha_lo",
        "alpha_hi",
        "contains_alpha",
        "sigma_lo",
        "sigma_hi",
        "contains_sigma",
        "unique_fraction",
        "ess",
        "error",
    ];

    fn fields(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(fmt_real).unwrap_or_default();
        vec![
            fmt_real(self.alpha_true),
            fmt_real(self.sigma_true),
            self.seed.to_string(),
            opt(self.ci_alpha.map(|c| c.lo)),
            opt(self.ci_alpha.map(|c| c.hi)),
            self.contains_alpha.to_string(),
            opt(self.ci_sigma.map(|c| c.lo)),
            opt(self.ci_sigma.map(|c| c.hi)),
            self.contains_sigma.to_string(),
            opt(self.diagnostics.map(|d| d.unique_fraction)),
            opt(self.diagnostics.map(|d| d.ess)),
            self.error.clone().unwrap_or_default(),
        ]
    }
}

/// Fits `dataset` and checks the intervals against `(alpha_true, sigma_true)`.
pub fn fit_dataset(
    dataset: &Dataset,
    alpha_true: f64,
    sigma_true: f64,
    seed: u64,
    prior: &PriorSpec,
    sir: &SirConfig,
    series: &SeriesConfig,
) -> FitRecord {
    let mut record = FitRecord::new(alpha_true, sigma_true, seed);
    let fitted = run_sir(dataset, prior, sir, series, &Sequential).and_then(|post| {
        let ci_alpha = credible_interval(&post.alphas(), LEVEL)?;
        let ci_sigma = credible_interval(&post.sigmas(), LEVEL)?;
        Ok((ci_alpha, ci_sigma, post.diagnostics))
    });
    match fitted {
        Ok((ci_alpha, ci_sigma, diagnostics)) => {
            record.contains_alpha = ci_alpha.contains(alpha_true);
            record.contains_sigma = ci_sigma.contains(sigma_true);
            record.ci_alpha = Some(ci_alpha);
            record.ci_sigma = Some(ci_sigma);
            record.diagnostics = Some(diagnostics);
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    record
}

/// Simulates with `seed` and fits with a sampler seed derived from it.
pub fn simulate_and_fit(
    alpha: f64,
    sigma: f64,
    seed: u64,
    grid: &GridSpec,
    prior: &PriorSpec,
    sir: &SirConfig,
    series: &SeriesConfig,
) -> FitRecord {
    let sir = SirConfig { seed: derive_seed(seed, FIT_TAG), ..*sir };
    let dataset = FractionalOrder::new(alpha).and_then(|a| simulate_dataset(grid, a, sigma, seed, series, &Sequential));
    match dataset {
        Ok(data) => fit_dataset(&data, alpha, sigma, seed, prior, &sir, series),
        Err(e) => FitRecord { error: Some(e.to_string()), ..FitRecord::new(alpha, sigma, seed) },
    }
}

fn cells(alphas: &[f64], sigmas: &[f64]) -> Vec<(f64, f64)> {
    alphas.iter().flat_map(|&a| sigmas.iter().map(move |&s| (a, s))).collect()
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn is_nondecreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[0] <= w[1])
}

/// One fit per `(alpha, sigma)` cell, alpha-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub alphas: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub cells: Vec<FitRecord>,
}

impl RobustnessReport {
    pub fn contained_alpha(&self) -> usize {
        self.cells.iter().filter(|c| c.contains_alpha).count()
    }

    pub fn contained_sigma(&self) -> usize {
        self.cells.iter().filter(|c| c.contains_sigma).count()
    }

    pub fn contained_both(&self) -> usize {
        self.cells.iter().filter(|c| c.contains_alpha && c.contains_sigma).count()
    }

    pub fn failed(&self) -> usize {
        self.cells.iter().filter(|c| c.failed()).count()
    }

    /// Mean alpha-interval width for each sigma (averaged over alpha).
    pub fn alpha_width_by_sigma(&self) -> Vec<f64> {
        let n_s = self.sigmas.len();
        (0..n_s)
            .map(|j| mean(self.cells.iter().skip(j).step_by(n_s).filter_map(|c| c.alpha_width())).unwrap_or(f64::NAN))
            .collect()
    }

    /// Mean alpha-interval width for each alpha (averaged over sigma).
    pub fn alpha_width_by_alpha(&self) -> Vec<f64> {
        self.cells
            .chunks(self.sigmas.len())
            .map(|row| mean(row.iter().filter_map(|c| c.alpha_width())).unwrap_or(f64::NAN))
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_csv(create_file(path)?, path, &FitRecord::COLUMNS, self.cells.iter().map(FitRecord::fields))
    }

    pub fn write_summary(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Summary<'a> {
            cells: usize,
            contained_alpha: usize,
            contained_sigma: usize,
            contained_both: usize,
            failed: usize,
            alpha_width_by_sigma: Vec<f64>,
            alpha_width_by_alpha: Vec<f64>,
            report: &'a RobustnessReport,
        }
        write_json(
            path,
            &Summary {
                cells: self.cells.len(),
                contained_alpha: self.contained_alpha(),
                contained_sigma: self.contained_sigma(),
                contained_both: self.contained_both(),
                failed: self.failed(),
                alpha_width_by_sigma: self.alpha_width_by_sigma(),
                alpha_width_by_alpha: self.alpha_width_by_alpha(),
                report: self,
            },
        )
    }
}

pub fn robustness_study<E: Executor>(cfg: &RobustnessConfig, exec: &E) -> Result<RobustnessReport> {
    cfg.validate()?;
    let cells = cells(&cfg.alphas, &cfg.sigmas);
    let records = exec.map(cells.len(), |c| {
        let (alpha, sigma) = cells[c];
        let seed = replicate_seed(cfg.base_seed, c as u32, 0);
        simulate_and_fit(alpha, sigma, seed, &cfg.grid, &cfg.prior, &cfg.sir, &cfg.series)
    });
    Ok(RobustnessReport { alphas: cfg.alphas.clone(), sigmas: cfg.sigmas.clone(), cells: records })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorRow {
    /// Both beta shapes of the prior on alpha.
    pub shape: f64,
    pub record: FitRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSensitivityReport {
    pub rows: Vec<PriorRow>,
}

impl PriorSensitivityReport {
    pub fn failed(&self) -> usize {
        self.rows.iter().filter(|r| r.record.failed()).count()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let header: Vec<&str> = std::iter::once("shape").chain(FitRecord::COLUMNS).collect();
        let rows = self.rows.iter().map(|r| std::iter::once(fmt_real(r.shape)).chain(r.record.fields()).collect());
        write_csv(create_file(path)?, path, &header, rows)
    }

    pub fn write_summary(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

/// One dataset at `(alpha_true, sigma_true)`, refitted under `Beta(s, s)`
/// for every shape `s` with the same sampler seed, so rows differ only by
/// the prior.
pub fn prior_sensitivity_study<E: Executor>(cfg: &PriorSensitivityConfig, exec: &E) -> Result<PriorSensitivityReport> {
    cfg.validate()?;
    let seed = replicate_seed(cfg.base_seed, 0, 0);
    let alpha = FractionalOrder::new(cfg.alpha_true)?;
    let dataset = simulate_dataset(&cfg.grid, alpha, cfg.sigma_true, seed, &cfg.series, &Sequential)?;
    let sir = SirConfig { seed: derive_seed(seed, FIT_TAG), ..cfg.sir };
    let records = exec.map(cfg.shape_values.len(), |k| {
        let prior = PriorSpec::beta(cfg.shape_values[k]);
        fit_dataset(&dataset, cfg.alpha_true, cfg.sigma_true, seed, &prior, &sir, &cfg.series)
    });
    let rows = cfg.shape_values.iter().zip(records).map(|(&shape, record)| PriorRow { shape, record }).collect();
    Ok(PriorSensitivityReport { rows })
}

/// Coverage of one `(alpha, sigma)` cell: the fraction of replicates whose
/// interval contains the truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageCell {
    pub alpha_true: f64,
    pub sigma_true: f64,
    pub m: usize,
    pub coverage_alpha: f64,
    pub coverage_sigma: f64,
    /// Replicates whose fit failed (counted as not covering).
    pub failed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub cells: Vec<CoverageCell>,
    /// Cell-major, then replicate.
    pub replicates: Vec<FitRecord>,
}

impl CoverageReport {
    pub fn failed(&self) -> usize {
        self.cells.iter().map(|c| c.failed).sum()
    }

    pub fn write_csv(&self, path: &Path, per_replicate: bool) -> Result<()> {
        let out = create_file(path)?;
        if per_replicate {
            let m = self.cells.first().map_or(1, |c| c.m);
            let header: Vec<&str> = ["cell", "replicate"].into_iter().chain(FitRecord::COLUMNS).collect();
            let rows = self
                .replicates
                .iter()
                .enumerate()
                .map(|(i, r)| [(i / m).to_string(), (i % m).to_string()].into_iter().chain(r.fields()).collect());
            write_csv(out, path, &header, rows)
        } else {
            let header = ["alpha_true", "sigma_true", "m", "coverage_alpha", "coverage_sigma", "failed"];
            let rows = self.cells.iter().map(|c| {
                vec![
                    fmt_real(c.alpha_true),
                    fmt_real(c.sigma_true),
                    c.m.to_string(),
                    fmt_real(c.coverage_alpha),
                    fmt_real(c.coverage_sigma),
                    c.failed.to_string(),
                ]
            });
            write_csv(out, path, &header, rows)
        }
    }

    pub fn write_summary(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Summary<'a> {
            cells: &'a [CoverageCell],
            failed: usize,
        }
        write_json(path, &Summary { cells: &self.cells, failed: self.failed() })
    }
}

pub fn coverage_study<E: Executor>(cfg: &CoverageConfig, exec: &E) -> Result<CoverageReport> {
    cfg.validate()?;
    let cells = cells(&cfg.alphas, &cfg.sigmas);
    let m = cfg.m;
    let replicates = exec.map(cells.len() * m, |job| {
        let (c, r) = (job / m, job % m);
        let (alpha, sigma) = cells[c];
        let seed = replicate_seed(cfg.base_seed, c as u32, r as u32);
        simulate_and_fit(alpha, sigma, seed, &cfg.grid, &cfg.prior, &cfg.sir, &cfg.series)
    });
    let summary = cells
        .iter()
        .zip(replicates.chunks(m))
        .map(|(&(alpha_true, sigma_true), reps)| CoverageCell {
            alpha_true,
            sigma_true,
            m,
            coverage_alpha: reps.iter().filter(|r| r.contains_alpha).count() as f64 / m as f64,
            coverage_sigma: reps.iter().filter(|r| r.contains_sigma).count() as f64 / m as f64,
            failed: reps.iter().filter(|r| r.failed()).count(),
        })
        .collect();
    Ok(CoverageReport { cells: summary, replicates })
}
