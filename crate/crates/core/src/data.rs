//! Flight records, CSV I/O, the altitude-deviation performance index,
//! correlation screening and a synthetic record generator.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, RandomStream};

pub const FEATURE_NAMES: [&str; 5] = ["HR", "RA", "RR", "BI", "FT"];
pub const TARGET_NAME: &str = "FPI";
pub const CSV_HEADER: [&str; 6] = ["HR", "RA", "RR", "BI", "FT", "FPI"];
pub const TRACE_HEADER: [&str; 2] = ["h_ac", "h_ex"];

/// One flight: five physiological features and the performance index.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    /// Heart rate.
    pub hr: f64,
    /// Respiration amplitude.
    pub ra: f64,
    /// Respiration rate.
    pub rr: f64,
    /// Blink interval.
    pub bi: f64,
    /// Instrument fixation time.
    pub ft: f64,
    pub fpi: f64,
}

impl Record {
    pub fn new(features: [f64; 5], fpi: f64) -> Result<Self> {
        if features.iter().chain([&fpi]).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("record"));
        }
        let [hr, ra, rr, bi, ft] = features;
        Ok(Record {
            hr,
            ra,
            rr,
            bi,
            ft,
            fpi,
        })
    }

    pub fn features(&self) -> [f64; 5] {
        [self.hr, self.ra, self.rr, self.bi, self.ft]
    }

    /// Features followed by the target, in CSV column order.
    pub fn values(&self) -> [f64; 6] {
        [self.hr, self.ra, self.rr, self.bi, self.ft, self.fpi]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Synthetic,
    File,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub records: Vec<Record>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn new(records: Vec<Record>, provenance: Provenance) -> Self {
        Dataset {
            records,
            provenance,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.fpi).collect()
    }

    pub fn feature_column(&self, index: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.features()[index]).collect()
    }

    pub fn feature_matrix(&self) -> Result<Matrix> {
        let rows: Vec<[f64; 5]> = self.records.iter().map(Record::features).collect();
        Matrix::from_rows(&rows)
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            records: indices.iter().map(|&i| self.records[i]).collect(),
            provenance: self.provenance,
        }
    }
}

/// Actual and planned altitude at each sampling point.
#[derive(Clone, Debug, PartialEq)]
pub struct FlightTrace {
    actual: Vec<f64>,
    expected: Vec<f64>,
}

impl FlightTrace {
    pub fn new(actual: Vec<f64>, expected: Vec<f64>) -> Result<Self> {
        if actual.len() != expected.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} actual altitudes but {} expected",
                actual.len(),
                expected.len()
            )));
        }
        if actual.is_empty() {
            return Err(Error::InvalidArgument("flight trace is empty".into()));
        }
        if actual.iter().chain(&expected).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("flight trace"));
        }
        Ok(FlightTrace { actual, expected })
    }

    pub fn len(&self) -> usize {
        self.actual.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actual.is_empty()
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let rows = read_numeric_csv(path, &TRACE_HEADER)?;
        if rows.is_empty() {
            return Err(Error::parse(path, 2, "no data rows"));
        }
        let (actual, expected) = rows.into_iter().map(|r| (r[0], r[1])).unzip();
        FlightTrace::new(actual, expected)
    }
}

/// Root-mean-square deviation of actual from planned altitude.
pub fn compute_fpi(trace: &FlightTrace) -> f64 {
    let sum: f64 = trace
        .actual
        .iter()
        .zip(&trace.expected)
        .map(|(a, e)| (a - e).powi(2))
        .sum();
    (sum / trace.len() as f64).sqrt()
}

/// Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "pearson inputs have lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument("need ≥ 2 records".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::ZeroVariance("first argument".into()));
    }
    if syy == 0.0 {
        return Err(Error::ZeroVariance("second argument".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureCorrelation {
    pub feature: String,
    pub r: f64,
}

/// Pearson r of each feature against the target, in `HR, RA, RR, BI, FT` order.
pub fn correlation_screen(dataset: &Dataset) -> Result<Vec<FeatureCorrelation>> {
    if dataset.len() < 2 {
        return Err(Error::InvalidArgument("need ≥ 2 records".into()));
    }
    let target = dataset.targets();
    if is_constant(&target) {
        return Err(Error::ZeroVariance(TARGET_NAME.into()));
    }
    FEATURE_NAMES
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let column = dataset.feature_column(i);
            if is_constant(&column) {
                return Err(Error::ZeroVariance((*name).into()));
            }
            Ok(FeatureCorrelation {
                feature: (*name).into(),
                r: pearson(&column, &target)?,
            })
        })
        .collect()
}

fn is_constant(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[0] == w[1])
}

fn check_header(path: &Path, found: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let names: Vec<&str> = found.iter().map(str::trim).collect();
    let want = expected.join(",");
    for name in expected {
        match names.iter().filter(|n| *n == name).count() {
            0 => {
                return Err(Error::parse(
                    path,
                    1,
                    format!("missing column {name} (header must be {want})"),
                ))
            }
            1 => {}
            _ => return Err(Error::parse(path, 1, format!("duplicate column {name}"))),
        }
    }
    if let Some(extra) = names.iter().find(|n| !expected.contains(n)) {
        return Err(Error::parse(
            path,
            1,
            format!("unexpected column {extra:?} (header must be {want})"),
        ));
    }
    if names != expected {
        return Err(Error::parse(path, 1, format!("header must be exactly {want}")));
    }
    Ok(())
}

fn read_numeric_csv(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);
    let found = reader
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .clone();
    if found.is_empty() || (found.len() == 1 && found[0].trim().is_empty()) {
        return Err(Error::parse(
            path,
            1,
            format!("empty file, expected header {}", header.join(",")),
        ));
    }
    check_header(path, &found, header)?;

    let mut rows = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::parse(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(Error::parse(
                path,
                line,
                format!("expected {} fields, found {}", header.len(), record.len()),
            ));
        }
        let values = record
            .iter()
            .zip(header)
            .map(|(cell, name)| {
                let v: f64 = cell.trim().parse().map_err(|_| {
                    Error::parse(path, line, format!("column {name}: not a number: {cell:?}"))
                })?;
                if !v.is_finite() {
                    return Err(Error::parse(
                        path,
                        line,
                        format!("column {name}: non-finite value {cell:?}"),
                    ));
                }
                Ok(v)
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(values);
    }
    Ok(rows)
}

/// Loads a dataset CSV with header `HR,RA,RR,BI,FT,FPI`.
pub fn load_csv(path: &Path) -> Result<Dataset> {
    let rows = read_numeric_csv(path, &CSV_HEADER)?;
    let records = rows
        .into_iter()
        .map(|r| Record::new([r[0], r[1], r[2], r[3], r[4]], r[5]))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset::new(records, Provenance::File))
}

/// Writes a dataset CSV; floats use shortest round-trip formatting.
pub fn save_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(32 * (dataset.len() + 1));
    out.push_str(&CSV_HEADER.join(","));
    out.push('\n');
    for r in &dataset.records {
        let cells: Vec<String> = r.values().iter().map(f64::to_string).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Multilinear core of the synthetic generator:
///
/// `0.9 HR + 0.8 RA - 0.7 RR + 0.5 BI + 0.6 FT + 0.8 HR*FT - 0.6 RA*RR`
///
/// Over the unit box this ranges over `[-0.7, 3.6]`.
fn synthetic_raw(f: &[f64; 5]) -> f64 {
    let [hr, ra, rr, bi, ft] = *f;
    0.9 * hr + 0.8 * ra - 0.7 * rr + 0.5 * bi + 0.6 * ft + 0.8 * hr * ft - 0.6 * ra * rr
}

/// The raw function is multilinear, so its extremes over the box sit on vertices.
fn synthetic_raw_range() -> (f64, f64) {
    (0..32u32).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), mask| {
        let mut v = [0.0; 5];
        for (i, c) in v.iter_mut().enumerate() {
            *c = f64::from((mask >> i) & 1);
        }
        let r = synthetic_raw(&v);
        (lo.min(r), hi.max(r))
    })
}

/// Squash steepness; the saturating ends are what a fixed random hidden layer fits poorly.
const SQUASH: f64 = 1.5;

/// Noiseless synthetic performance index for features in `[0, 1]^5`.
///
/// With `u` the raw value rescaled to `[0, 1]`, the target is
/// `0.5 + 0.4 * tanh(1.5 (2u - 1)) / tanh(1.5)`, so it spans exactly `[0.1, 0.9]`.
pub fn synthetic_target(features: &[f64; 5]) -> f64 {
    let (lo, hi) = synthetic_raw_range();
    let u = (synthetic_raw(features) - lo) / (hi - lo);
    0.5 + 0.4 * (SQUASH * (2.0 * u - 1.0)).tanh() / SQUASH.tanh()
}

/// Uniform features in `[0, 1)`, target `clamp01(g(features) + N(0, noise_sd))`.
pub fn generate_synthetic(n: usize, noise_sd: f64, stream: &mut RandomStream) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be ≥ 1".into()));
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise standard deviation must be ≥ 0, got {noise_sd}"
        )));
    }
    let records = (0..n)
        .map(|_| {
            let mut f = [0.0; 5];
            for v in &mut f {
                *v = stream.unit();
            }
            let mut fpi = synthetic_target(&f);
            if noise_sd > 0.0 {
                fpi = stream.gaussian(fpi, noise_sd).clamp(0.0, 1.0);
            }
            Record::new(f, fpi)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset::new(records, Provenance::Synthetic))
}
