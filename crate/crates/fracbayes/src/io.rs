//! File formats.
//!
//! | artifact          | format | columns / keys                                   |
//! |-------------------|--------|--------------------------------------------------|
//! | dataset           | CSV    | `x,t,p`                                          |
//! | posterior samples | CSV    | `alpha,sigma2`                                   |
//! | diagnostics       | JSON   | `unique_fraction, ess, max_weight, n_finite_weights` |
//! | profiles          | CSV    | `fixed_label,fixed_value,coord,q025,q50,q975`    |
//! | intervals         | JSON   | list of `{parameter, lo, hi, level}`             |
//!
//! Reals are written with 17 significant digits, enough for every `f64` to
//! read back to the same bits.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use fracbayes_core::{Axis, CredibleInterval, Dataset, Observation, PredictiveProfile, ProfilePoint, SirDiagnostics, Theta};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DATASET_HEADER: [&str; 3] = ["x", "t", "p"];
pub const SAMPLES_HEADER: [&str; 2] = ["alpha", "sigma2"];
pub const PROFILE_HEADER: [&str; 6] = ["fixed_label", "fixed_value", "coord", "q025", "q50", "q975"];

/// `v` with 17 significant digits.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn create_file(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        kind => Error::Parse { path: path.into(), line, message: format!("{kind:?}") },
    }
}

/// Writes rows of already formatted fields under `header`.
pub(crate) fn write_csv<W: Write>(w: W, path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        out.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads a CSV with exactly `header`, handing each record and its line number to `row`.
fn read_csv<R: Read, T>(
    r: R,
    path: &Path,
    header: &[&str],
    mut row: impl FnMut(&csv::StringRecord, u64) -> Result<T>,
) -> Result<Vec<T>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let found = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::Format {
            path: path.into(),
            message: format!("expected header `{}`, found `{}`", header.join(","), found.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        out.push(row(&record, line)?);
    }
    Ok(out)
}

fn real(record: &csv::StringRecord, i: usize, name: &str, path: &Path, line: u64) -> Result<f64> {
    let field = record.get(i).unwrap_or("");
    field.parse::<f64>().map_err(|_| Error::Parse {
        path: path.into(),
        line,
        message: format!("column `{name}`: cannot parse {field:?} as a number"),
    })
}

pub fn write_dataset_to<W: Write>(w: W, dataset: &Dataset, path: &Path) -> Result<()> {
    let rows = dataset.observations().iter().map(|o| vec![fmt_real(o.x), fmt_real(o.t), fmt_real(o.p)]);
    write_csv(w, path, &DATASET_HEADER, rows)
}

pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    write_dataset_to(create_file(path)?, dataset, path)
}

/// Parses a dataset; `path` only labels errors.
pub fn read_dataset_from<R: Read>(r: R, path: &Path) -> Result<Dataset> {
    let observations = read_csv(r, path, &DATASET_HEADER, |rec, line| {
        let obs = Observation {
            x: real(rec, 0, "x", path, line)?,
            t: real(rec, 1, "t", path, line)?,
            p: real(rec, 2, "p", path, line)?,
        };
        obs.validate().map_err(|e| Error::Parse { path: path.into(), line, message: e.to_string() })?;
        Ok(obs)
    })?;
    if observations.is_empty() {
        return Err(Error::Format { path: path.into(), message: "no observations".into() });
    }
    Ok(Dataset::new(observations)?)
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    read_dataset_from(open(path)?, path)
}

pub fn write_samples_to<W: Write>(w: W, samples: &[Theta], path: &Path) -> Result<()> {
    write_csv(w, path, &SAMPLES_HEADER, samples.iter().map(|s| vec![fmt_real(s.alpha), fmt_real(s.sigma2)]))
}

pub fn write_samples(path: &Path, samples: &[Theta]) -> Result<()> {
    write_samples_to(create_file(path)?, samples, path)
}

/// Parses posterior samples; an empty file is an error.
pub fn read_samples_from<R: Read>(r: R, path: &Path) -> Result<Vec<Theta>> {
    let samples = read_csv(r, path, &SAMPLES_HEADER, |rec, line| {
        let theta = Theta::new(real(rec, 0, "alpha", path, line)?, real(rec, 1, "sigma2", path, line)?);
        if !(theta.alpha > 0.0 && theta.alpha <= 1.0 && theta.sigma2 >= 0.0 && theta.sigma2.is_finite()) {
            return Err(Error::Parse {
                path: path.into(),
                line,
                message: format!("sample {theta:?} outside the parameter space"),
            });
        }
        Ok(theta)
    })?;
    if samples.is_empty() {
        return Err(fracbayes_core::Error::EmptySamples.into());
    }
    Ok(samples)
}

pub fn read_samples(path: &Path) -> Result<Vec<Theta>> {
    read_samples_from(open(path)?, path)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = create_file(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| Error::Json { path: path.into(), source })?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path: path.into(), source })
}

pub fn write_diagnostics(path: &Path, diagnostics: &SirDiagnostics) -> Result<()> {
    write_json(path, diagnostics)
}

pub fn read_diagnostics(path: &Path) -> Result<SirDiagnostics> {
    read_json(path)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalRecord {
    pub parameter: String,
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
}

impl IntervalRecord {
    pub fn new(parameter: &str, ci: &CredibleInterval) -> Self {
        IntervalRecord { parameter: parameter.into(), lo: ci.lo, hi: ci.hi, level: ci.level }
    }
}

pub fn write_intervals(path: &Path, intervals: &[IntervalRecord]) -> Result<()> {
    write_json(path, intervals)
}

pub fn read_intervals(path: &Path) -> Result<Vec<IntervalRecord>> {
    read_json(path)
}

pub fn write_profiles_to<W: Write>(w: W, profiles: &[PredictiveProfile], path: &Path) -> Result<()> {
    let rows = profiles.iter().flat_map(|prof| {
        prof.points.iter().map(move |pt| {
            vec![
                prof.fixed.label().to_string(),
                fmt_real(prof.fixed_value),
                fmt_real(pt.coord),
                fmt_real(pt.q025),
                fmt_real(pt.q50),
                fmt_real(pt.q975),
            ]
        })
    });
    write_csv(w, path, &PROFILE_HEADER, rows)
}

pub fn write_profiles(path: &Path, profiles: &[PredictiveProfile]) -> Result<()> {
    write_profiles_to(create_file(path)?, profiles, path)
}

/// Parses profiles; consecutive rows with the same slice form one profile.
pub fn read_profiles_from<R: Read>(r: R, path: &Path) -> Result<Vec<PredictiveProfile>> {
    let rows = read_csv(r, path, &PROFILE_HEADER, |rec, line| {
        let fixed = match rec.get(0).unwrap_or("") {
            "x" => Axis::X,
            "t" => Axis::T,
            other => {
                return Err(Error::Parse {
                    path: path.into(),
                    line,
                    message: format!("column `fixed_label`: expected x or t, found {other:?}"),
                })
            }
        };
        let value = real(rec, 1, "fixed_value", path, line)?;
        let point = ProfilePoint {
            coord: real(rec, 2, "coord", path, line)?,
            q025: real(rec, 3, "q025", path, line)?,
            q50: real(rec, 4, "q50", path, line)?,
            q975: real(rec, 5, "q975", path, line)?,
        };
        Ok((fixed, value, point))
    })?;
    let mut profiles: Vec<PredictiveProfile> = Vec::new();
    for (fixed, value, point) in rows {
        match profiles.last_mut() {
            Some(p) if p.fixed == fixed && p.fixed_value.to_bits() == value.to_bits() => p.points.push(point),
            _ => profiles.push(PredictiveProfile { fixed, fixed_value: value, points: vec![point] }),
        }
    }
    Ok(profiles)
}

pub fn read_profiles(path: &Path) -> Result<Vec<PredictiveProfile>> {
    read_profiles_from(open(path)?, path)
}
