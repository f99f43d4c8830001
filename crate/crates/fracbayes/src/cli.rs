//! The `fracbayes` command line.
//!
//! ```text
//! fracbayes simulate          --config run.json [--seed N] [--out data.csv]
//! fracbayes fit               --config run.json [--data data.csv] [--out samples.csv] [--diagnostics d.json] [--intervals i.json]
//! fracbayes predict           --config run.json [--samples samples.csv] [--out profiles.csv]
//! fracbayes robustness        --config study.json --out table.csv [--summary s.json]
//! fracbayes prior-sensitivity --config study.json --out table.csv [--summary s.json]
//! fracbayes coverage          --config study.json --out table.csv [--summary s.json] [--per-replicate]
//! ```
//!
//! Every command takes `--threads N` (falling back to `FRACBAYES_THREADS`),
//! which changes speed only, never results. Summaries go to standard output;
//! artifacts only to files.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use fracbayes_core::{
    credible_interval, predictive_profiles, run_sir_detailed, simulate_dataset, Axis, Error as CoreError, FractionalOrder,
    SirDiagnostics,
};

use crate::config::{self, missing, CoverageConfig, PriorSensitivityConfig, RobustnessConfig, RunConfig};
use crate::error::{Error, Result};
use crate::exec::Parallel;
use crate::experiments::{coverage_study, is_nondecreasing, prior_sensitivity_study, robustness_study, LEVEL};
use crate::io;

#[derive(Debug, Parser)]
#[command(name = "fracbayes", version, about = "Bayesian estimation of the fractional order of an anomalous diffusion model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a noisy dataset from the `truth` block.
    Simulate(Common),
    /// Draw posterior samples for a dataset.
    Fit(FitArgs),
    /// Posterior predictive profiles along grid lines.
    Predict(PredictArgs),
    /// One fit per (alpha, sigma) cell.
    Robustness(StudyArgs),
    /// One dataset refitted under a range of priors on alpha.
    PriorSensitivity(StudyArgs),
    /// Coverage of the credible intervals over replicated datasets.
    Coverage(CoverageArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON config file.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the seed of this command's random stage.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Primary output file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 or unset means one per core.
    #[arg(long, env = "FRACBAYES_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dataset CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Diagnostics JSON.
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
    /// Credible interval JSON.
    #[arg(long)]
    pub intervals: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: Common,
    /// Posterior samples CSV.
    #[arg(long)]
    pub samples: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[command(flatten)]
    pub common: Common,
    /// JSON summary; defaults to the output path with a `.summary.json` extension.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CoverageArgs {
    #[command(flatten)]
    pub study: StudyArgs,
    /// One output row per replicate instead of per cell.
    #[arg(long)]
    pub per_replicate: bool,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Fit(args) => cmd_fit(&args),
        Command::Predict(args) => cmd_predict(&args),
        Command::Robustness(args) => cmd_robustness(&args),
        Command::PriorSensitivity(args) => cmd_prior_sensitivity(&args),
        Command::Coverage(args) => cmd_coverage(&args),
    }
}

fn load_run(common: &Common) -> Result<RunConfig> {
    let cfg: RunConfig = config::load(&common.config)?;
    cfg.validate()?;
    Ok(cfg)
}

fn pick(flag: &Option<PathBuf>, configured: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    flag.clone()
        .or_else(|| configured.clone())
        .ok_or_else(|| missing(&format!("no {what} path: pass a flag or set it under `outputs` in the config")))
}

pub fn cmd_simulate(args: &Common) -> Result<()> {
    let cfg = load_run(args)?;
    let truth = cfg.truth.ok_or_else(|| missing("truth required for simulate"))?;
    let seed = args.seed.unwrap_or(truth.seed);
    let out = pick(&args.out, &cfg.outputs.data, "dataset output")?;
    keep_config(&args.config, &[&out])?;
    let exec = Parallel::new(args.threads)?;
    let alpha = FractionalOrder::new(truth.alpha)?;
    let dataset = simulate_dataset(&cfg.grid, alpha, truth.sigma, seed, &cfg.series, &exec)?;
    io::write_dataset(&out, &dataset)?;
    println!(
        "simulated {} points (alpha = {}, sigma = {}, seed = {}) -> {}",
        dataset.len(),
        truth.alpha,
        truth.sigma,
        seed,
        out.display()
    );
    Ok(())
}

fn with_extension(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

/// Errors if any output would overwrite the config.
fn keep_config(config: &Path, outputs: &[&Path]) -> Result<()> {
    match outputs.iter().find(|p| same_file(p, config)) {
        Some(p) => Err(Error::Usage(format!("refusing to overwrite the config file {}", p.display()))),
        None => Ok(()),
    }
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => a == b,
    }
}

pub fn cmd_fit(args: &FitArgs) -> Result<()> {
    let common = &args.common;
    let cfg = load_run(common)?;
    let data_path = pick(&args.data, &cfg.outputs.data, "dataset")?;
    let samples_path = pick(&common.out, &cfg.outputs.samples, "samples output")?;
    let diag_path = args
        .diagnostics
        .clone()
        .or_else(|| cfg.outputs.diagnostics.clone())
        .unwrap_or_else(|| with_extension(&samples_path, "diagnostics.json"));
    let intervals_path = args.intervals.clone().or_else(|| cfg.outputs.intervals.clone());
    let mut outputs = vec![samples_path.as_path(), diag_path.as_path()];
    outputs.extend(intervals_path.as_deref());
    keep_config(&common.config, &outputs)?;
    let exec = Parallel::new(common.threads)?;
    let dataset = io::read_dataset(&data_path)?;
    let mut sir = cfg.sir;
    if let Some(seed) = common.seed {
        sir.seed = seed;
    }
    let run = match run_sir_detailed(&dataset, &cfg.prior, &sir, &cfg.series, &exec) {
        Ok(run) => run,
        Err(e) => {
            if matches!(e, CoreError::DegeneratePilot { .. } | CoreError::PilotStalled { .. } | CoreError::TotalDegeneracy { .. })
            {
                let empty = SirDiagnostics { unique_fraction: 0.0, ess: 0.0, max_weight: 0.0, n_finite_weights: 0 };
                io::write_diagnostics(&diag_path, &empty)?;
            }
            return Err(e.into());
        }
    };
    let post = &run.posterior;
    io::write_samples(&samples_path, &post.samples)?;
    io::write_diagnostics(&diag_path, &post.diagnostics)?;
    let ci_alpha = credible_interval(&post.alphas(), LEVEL)?;
    let ci_sigma = credible_interval(&post.sigmas(), LEVEL)?;
    if let Some(path) = intervals_path {
        io::write_intervals(&path, &[io::IntervalRecord::new("alpha", &ci_alpha), io::IntervalRecord::new("sigma", &ci_sigma)])?;
    }
    let d = &post.diagnostics;
    println!("fitted {} observations with {} candidates, {} samples", dataset.len(), sir.n_c, sir.n_s);
    println!("alpha 95% interval: ({:.4}, {:.4})", ci_alpha.lo, ci_alpha.hi);
    println!("sigma 95% interval: ({:.4}, {:.4})", ci_sigma.lo, ci_sigma.hi);
    println!("unique fraction {:.3}, ESS {:.1}, max weight {:.3e}", d.unique_fraction, d.ess, d.max_weight);
    println!("samples -> {}, diagnostics -> {}", samples_path.display(), diag_path.display());
    Ok(())
}

pub fn cmd_predict(args: &PredictArgs) -> Result<()> {
    let common = &args.common;
    let cfg = load_run(common)?;
    let samples_path = pick(&args.samples, &cfg.outputs.samples, "samples")?;
    let out = pick(&common.out, &cfg.outputs.profiles, "profile output")?;
    keep_config(&common.config, &[&out])?;
    let exec = Parallel::new(common.threads)?;
    let samples = io::read_samples(&samples_path)?;
    let seed = common.seed.unwrap_or(cfg.predict.seed);
    let mut profiles = Vec::new();
    for fixed in [Axis::X, Axis::T] {
        let slices = match fixed {
            Axis::X => cfg.predict.x_slices.clone(),
            Axis::T => cfg.predict.t_slices.clone(),
        }
        .unwrap_or_else(|| cfg.grid.default_slices(fixed));
        profiles.extend(predictive_profiles(
            &samples,
            &cfg.grid,
            &slices,
            fixed,
            cfg.predict.draws_per_sample,
            seed,
            &cfg.series,
            &exec,
        )?);
    }
    for prof in &profiles {
        for pt in &prof.points {
            if !(0.0 < pt.q025 && pt.q025 <= pt.q50 && pt.q50 <= pt.q975) {
                return Err(Error::Usage(format!(
                    "unordered predictive quantiles at {} = {}",
                    prof.fixed.label(),
                    prof.fixed_value
                )));
            }
        }
    }
    io::write_profiles(&out, &profiles)?;
    println!("{} profiles from {} posterior samples -> {}", profiles.len(), samples.len(), out.display());
    Ok(())
}

struct StudyOutput {
    table: PathBuf,
    summary: PathBuf,
    exec: Parallel,
}

fn study_output(args: &StudyArgs) -> Result<StudyOutput> {
    let table = args.common.out.clone().ok_or_else(|| missing("--out is required for studies"))?;
    let summary = args.summary.clone().unwrap_or_else(|| with_extension(&table, "summary.json"));
    keep_config(&args.common.config, &[&table, &summary])?;
    Ok(StudyOutput { table, summary, exec: Parallel::new(args.common.threads)? })
}

fn total_failure(failed: usize, total: usize) -> Result<()> {
    if total > 0 && failed == total {
        Err(Error::Usage(format!("all {total} fits failed; see the error column of the output")))
    } else {
        Ok(())
    }
}

pub fn cmd_robustness(args: &StudyArgs) -> Result<()> {
    let mut cfg: RobustnessConfig = config::load(&args.common.config)?;
    if let Some(seed) = args.common.seed {
        cfg.base_seed = seed;
    }
    let out = study_output(args)?;
    let report = robustness_study(&cfg, &out.exec)?;
    report.write_csv(&out.table)?;
    report.write_summary(&out.summary)?;
    let n = report.cells.len();
    println!("{:>6} {:>6}  {:>21}  {:>19}", "alpha", "sigma", "alpha 95% interval", "sigma 95% interval");
    for c in &report.cells {
        match (c.ci_alpha, c.ci_sigma) {
            (Some(a), Some(s)) => println!(
                "{:>6} {:>6}  ({:.4}, {:.4}) {}  ({:.4}, {:.4}) {}",
                c.alpha_true,
                c.sigma_true,
                a.lo,
                a.hi,
                mark(c.contains_alpha),
                s.lo,
                s.hi,
                mark(c.contains_sigma)
            ),
            _ => println!("{:>6} {:>6}  failed: {}", c.alpha_true, c.sigma_true, c.error.as_deref().unwrap_or("")),
        }
    }
    let by_sigma = report.alpha_width_by_sigma();
    let by_alpha = report.alpha_width_by_alpha();
    println!(
        "alpha contained in {}/{n} cells, sigma in {}/{n}, both in {}/{n}",
        report.contained_alpha(),
        report.contained_sigma(),
        report.contained_both()
    );
    println!("mean alpha width by sigma: {} ({})", fmt_list(&by_sigma), trend(&by_sigma));
    println!("mean alpha width by alpha: {} ({})", fmt_list(&by_alpha), trend(&by_alpha));
    println!("table -> {}, summary -> {}", out.table.display(), out.summary.display());
    total_failure(report.failed(), n)
}

pub fn cmd_prior_sensitivity(args: &StudyArgs) -> Result<()> {
    let mut cfg: PriorSensitivityConfig = config::load(&args.common.config)?;
    if let Some(seed) = args.common.seed {
        cfg.base_seed = seed;
    }
    let out = study_output(args)?;
    let report = prior_sensitivity_study(&cfg, &out.exec)?;
    report.write_csv(&out.table)?;
    report.write_summary(&out.summary)?;
    println!("{:>6}  {:>21}  {:>19}", "shape", "alpha 95% interval", "sigma 95% interval");
    for row in &report.rows {
        let c = &row.record;
        match (c.ci_alpha, c.ci_sigma) {
            (Some(a), Some(s)) => println!(
                "{:>6}  ({:.4}, {:.4}) {}  ({:.4}, {:.4}) {}",
                row.shape,
                a.lo,
                a.hi,
                mark(c.contains_alpha),
                s.lo,
                s.hi,
                mark(c.contains_sigma)
            ),
            _ => println!("{:>6}  failed: {}", row.shape, c.error.as_deref().unwrap_or("")),
        }
    }
    println!("table -> {}, summary -> {}", out.table.display(), out.summary.display());
    total_failure(report.failed(), report.rows.len())
}

pub fn cmd_coverage(args: &CoverageArgs) -> Result<()> {
    let mut cfg: CoverageConfig = config::load(&args.study.common.config)?;
    if let Some(seed) = args.study.common.seed {
        cfg.base_seed = seed;
    }
    let out = study_output(&args.study)?;
    let report = coverage_study(&cfg, &out.exec)?;
    report.write_csv(&out.table, args.per_replicate)?;
    report.write_summary(&out.summary)?;
    println!("{:>6} {:>6}  {:>8} {:>8}  {:>6}", "alpha", "sigma", "cov(a)", "cov(s)", "failed");
    for c in &report.cells {
        println!("{:>6} {:>6}  {:>8.3} {:>8.3}  {:>6}", c.alpha_true, c.sigma_true, c.coverage_alpha, c.coverage_sigma, c.failed);
    }
    let low = report.cells.iter().map(|c| c.coverage_alpha.min(c.coverage_sigma)).fold(1.0, f64::min);
    println!("lowest coverage {low:.3} over {} cells of m = {}", report.cells.len(), cfg.m);
    println!("table -> {}, summary -> {}", out.table.display(), out.summary.display());
    total_failure(report.failed(), report.replicates.len())
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "MISS"
    }
}

fn fmt_list(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>().join(" ")
}

fn trend(values: &[f64]) -> &'static str {
    if is_nondecreasing(values) {
        "nondecreasing"
    } else {
        "not monotone"
    }
}
