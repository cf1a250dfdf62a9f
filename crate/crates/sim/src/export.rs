//! CSV and manifest writers.
//!
//! Floats are written with Rust's shortest round-trip formatting, so parsing
//! an exported value gives back the identical `f64`. Undefined values (a
//! cell with no ok reps, an undefined correlation) are written as empty
//! fields.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use log::warn;

use ate_core::{math, EstimatorId};

use crate::harness::{failure_reason, Cell, McReport};

pub const TABLE_FILE: &str = "table.csv";
pub const DRAWS_FILE: &str = "draws.csv";
pub const AUGMENTATION_FILE: &str = "augmentation.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const MANIFEST_FILE: &str = "run-manifest.txt";

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{0}")]
    Precondition(String),
    #[error("{path}, record {record}: {reason}")]
    Parse { path: PathBuf, record: usize, reason: String },
}

fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        String::new()
    }
}

struct CsvOut {
    path: PathBuf,
    writer: csv::Writer<fs::File>,
}

impl CsvOut {
    fn create(path: &Path, header: &[&str]) -> Result<Self, ExportError> {
        let writer = csv::Writer::from_path(path).map_err(|source| ExportError::Csv { path: path.into(), source })?;
        let mut out = Self { path: path.into(), writer };
        out.row(header.iter().map(|s| s.to_string()))?;
        Ok(out)
    }

    fn row(&mut self, fields: impl IntoIterator<Item = String>) -> Result<(), ExportError> {
        let fields: Vec<String> = fields.into_iter().collect();
        self.writer.write_record(&fields).map_err(|source| ExportError::Csv { path: self.path.clone(), source })
    }

    fn finish(mut self) -> Result<(), ExportError> {
        self.writer.flush().map_err(|source| ExportError::Io { path: self.path, source })
    }
}

const TABLE_HEADER: [&str; 7] = ["design", "r2_y", "estimator", "bias", "se", "na", "rmse"];

/// One row per (design, r2_y, estimator) cell, in the report's order.
pub fn export_table(report: &McReport, path: &Path) -> Result<(), ExportError> {
    if report.cells.is_empty() {
        return Err(ExportError::Precondition("report has no cells".into()));
    }
    let mut out = CsvOut::create(path, &TABLE_HEADER)?;
    for c in &report.cells {
        out.row([
            c.design.to_string(),
            c.r2_y.to_string(),
            c.estimator.name().to_string(),
            fmt_f64(c.bias),
            fmt_f64(c.se),
            c.na.to_string(),
            fmt_f64(c.rmse),
        ])?;
    }
    out.finish()
}

/// A parsed row of `table.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub design: u8,
    pub r2_y: f64,
    pub estimator: EstimatorId,
    pub bias: f64,
    pub se: f64,
    pub na: usize,
    pub rmse: f64,
}

impl TableRow {
    pub fn from_cell(c: &Cell) -> Self {
        Self { design: c.design, r2_y: c.r2_y, estimator: c.estimator, bias: c.bias, se: c.se, na: c.na, rmse: c.rmse }
    }

    /// Field-wise equality treating two NaNs as equal.
    pub fn same_values(&self, other: &Self) -> bool {
        let eq = |a: f64, b: f64| a == b || (a.is_nan() && b.is_nan());
        self.design == other.design
            && self.r2_y == other.r2_y
            && self.estimator == other.estimator
            && eq(self.bias, other.bias)
            && eq(self.se, other.se)
            && self.na == other.na
            && eq(self.rmse, other.rmse)
    }
}

pub fn read_table(path: &Path) -> Result<Vec<TableRow>, ExportError> {
    let mut reader = csv::Reader::from_path(path).map_err(|source| ExportError::Csv { path: path.into(), source })?;
    let headers = reader.headers().map_err(|source| ExportError::Csv { path: path.into(), source })?.clone();
    if headers.iter().ne(TABLE_HEADER) {
        return Err(ExportError::Parse { path: path.into(), record: 0, reason: format!("unexpected header {headers:?}") });
    }
    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|source| ExportError::Csv { path: path.into(), source })?;
        let fail = |reason: String| ExportError::Parse { path: path.into(), record: idx + 1, reason };
        let float = |i: usize| -> Result<f64, ExportError> {
            let s = &record[i];
            if s.is_empty() {
                Ok(f64::NAN)
            } else {
                s.parse().map_err(|e| fail(format!("{}: {e}", TABLE_HEADER[i])))
            }
        };
        rows.push(TableRow {
            design: record[0].parse().map_err(|e| fail(format!("design: {e}")))?,
            r2_y: float(1)?,
            estimator: EstimatorId::from_name(&record[2]).ok_or_else(|| fail(format!("estimator {:?}", &record[2])))?,
            bias: float(3)?,
            se: float(4)?,
            na: record[5].parse().map_err(|e| fail(format!("na: {e}")))?,
            rmse: float(6)?,
        });
    }
    Ok(rows)
}

/// Raw, recentered (`ate − θ`) and standardized (`(ate − mean)/sd`, with the
/// population sd used for `se`) draws of every ok rep. Cells with fewer than
/// two ok reps, or with zero spread, get a single warning row instead.
pub fn export_draws(report: &McReport, path: &Path) -> Result<(), ExportError> {
    let mut out = CsvOut::create(
        path,
        &["design", "r2_y", "estimator", "rep", "ate_hat", "recentered", "standardized", "note"],
    )?;
    for c in &report.cells {
        let key = [c.design.to_string(), c.r2_y.to_string(), c.estimator.name().to_string()];
        let ok = c.ok_draws();
        let mean = math::mean(&ok);
        let sd = math::sqrt(math::population_variance(&ok));
        if ok.len() < 2 || sd.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            let note = if ok.len() < 2 {
                format!("skipped: {} ok reps (need 2)", ok.len())
            } else {
                "skipped: zero spread".to_string()
            };
            warn!("draws: design {} r2_y {} {}: {note}", c.design, c.r2_y, c.estimator.name());
            out.row(key.iter().cloned().chain([String::new(), String::new(), String::new(), String::new(), note]))?;
            continue;
        }
        for (rep, v) in c.draws.iter().enumerate() {
            let Some(v) = *v else { continue };
            out.row(key.iter().cloned().chain([
                rep.to_string(),
                v.to_string(),
                (v - c.theta).to_string(),
                ((v - mean) / sd).to_string(),
                String::new(),
            ]))?;
        }
    }
    out.finish()
}

/// Pearson correlation; `None` when fewer than two pairs or either side has
/// zero variance.
pub fn correlation(pairs: &[(f64, f64)]) -> Option<f64> {
    if pairs.len() < 2 {
        return None;
    }
    let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (ma, mb) = (math::mean(&a), math::mean(&b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(&b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some((sab / math::sqrt(saa * sbb)).clamp(-1.0, 1.0))
}

/// Per-rep `(weighting-only estimate, augmentation term)` pairs for AIPW and
/// ARM, followed by one correlation row per cell.
pub fn export_augmentation(report: &McReport, path: &Path) -> Result<(), ExportError> {
    for id in [EstimatorId::Aipw, EstimatorId::Arm] {
        if !report.config.estimators.contains(&id) {
            return Err(ExportError::Precondition(format!("augmentation export needs {}", id.label())));
        }
    }
    let mut out = CsvOut::create(
        path,
        &["design", "r2_y", "estimator", "rep", "weighting_only", "augmentation", "correlation", "note"],
    )?;
    for c in report.cells.iter().filter(|c| matches!(c.estimator, EstimatorId::Aipw | EstimatorId::Arm)) {
        let Some(pairs) = &c.augmentation else {
            return Err(ExportError::Precondition(format!(
                "design {} r2_y {} {}: decomposition missing",
                c.design, c.r2_y, c.estimator.label()
            )));
        };
        let key = [c.design.to_string(), c.r2_y.to_string(), c.estimator.name().to_string()];
        let mut defined = Vec::with_capacity(pairs.len());
        for (rep, pair) in pairs.iter().enumerate() {
            let Some((w, a)) = *pair else { continue };
            defined.push((w, a));
            out.row(key.iter().cloned().chain([rep.to_string(), w.to_string(), a.to_string(), String::new(), String::new()]))?;
        }
        let (corr, note) = match correlation(&defined) {
            Some(r) => (r.to_string(), String::new()),
            None => {
                warn!("augmentation: design {} r2_y {} {}: correlation undefined", c.design, c.r2_y, c.estimator.name());
                (String::new(), "correlation undefined".to_string())
            }
        };
        out.row(key.iter().cloned().chain([String::new(), String::new(), String::new(), corr, note]))?;
    }
    out.finish()
}

/// Long-format per-rep nuisance diagnostics and estimator failure reasons.
pub fn export_diagnostics(report: &McReport, path: &Path) -> Result<(), ExportError> {
    let mut out = CsvOut::create(
        path,
        &["design", "r2_y", "rep", "seed", "n_treated", "component", "rule", "lambda", "active", "failure"],
    )?;
    let join = |v: Vec<String>| v.join(";");
    for rec in &report.reps {
        let key = [rec.design.to_string(), rec.r2_y.to_string(), rec.rep.to_string(), rec.seed.to_string(), rec.n_treated.to_string()];
        for nr in &rec.nuisance {
            out.row(key.iter().cloned().chain([
                nr.component.to_string(),
                nr.rule.name().to_string(),
                join(nr.lambda.iter().map(f64::to_string).collect()),
                join(nr.active.iter().map(usize::to_string).collect()),
                nr.failure.clone().unwrap_or_default(),
            ]))?;
        }
        for res in &rec.results {
            if let Some(reason) = failure_reason(res) {
                out.row(key.iter().cloned().chain([
                    format!("estimator:{}", res.id.name()),
                    String::new(),
                    String::new(),
                    String::new(),
                    reason.to_string(),
                ]))?;
            }
        }
    }
    out.finish()
}

/// Resolved configuration, seeding scheme and calibration constants.
pub fn manifest_text(report: &McReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "# rng = ChaCha8, seeds derived by SplitMix64 mixing");
    let _ = writeln!(s, "# rep seed = derive_seed(seed, [design, rep])");
    let _ = writeln!(s, "# se convention = population (divide by ok reps)");
    s.push_str(&report.config.to_pairs_text());
    for d in &report.designs {
        let _ = writeln!(s, "# design {}: pilot_seed = {}, theta = {}, c_d = {}, signal_variance = {}", d.design, d.pilot_seed, d.theta, d.c_d, d.signal_variance);
        for (r2, c_y) in &d.c_y {
            let _ = writeln!(s, "#   r2_y = {r2}: c_y = {c_y}");
        }
    }
    s
}

pub fn export_manifest(report: &McReport, path: &Path) -> Result<(), ExportError> {
    fs::write(path, manifest_text(report)).map_err(|source| ExportError::Io { path: path.into(), source })
}

/// Writes every output into `dir`, creating it if needed. The augmentation
/// file is skipped (with a warning) unless both AIPW and ARM were requested.
pub fn write_outputs(report: &McReport, dir: &Path) -> Result<Vec<PathBuf>, ExportError> {
    fs::create_dir_all(dir).map_err(|source| ExportError::Io { path: dir.into(), source })?;
    let mut written = Vec::new();
    let mut emit = |name: &str, f: fn(&McReport, &Path) -> Result<(), ExportError>| {
        let path = dir.join(name);
        f(report, &path)?;
        written.push(path);
        Ok::<_, ExportError>(())
    };
    emit(TABLE_FILE, export_table)?;
    emit(DRAWS_FILE, export_draws)?;
    let est = &report.config.estimators;
    if est.contains(&EstimatorId::Aipw) && est.contains(&EstimatorId::Arm) {
        emit(AUGMENTATION_FILE, export_augmentation)?;
    } else {
        warn!("skipping {AUGMENTATION_FILE}: needs both AIPW and ARM");
    }
    emit(DIAGNOSTICS_FILE, export_diagnostics)?;
    emit(MANIFEST_FILE, export_manifest)?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn correlation_edge_cases() {
        assert_eq!(correlation(&[(1.0, 2.0)]), None);
        assert_eq!(correlation(&[(1.0, 0.0), (2.0, 0.0), (3.0, 0.0)]), None);
        let r = correlation(&[(1.0, -2.0), (2.0, -4.0), (3.0, -6.0)]).unwrap();
        assert!((r + 1.0).abs() < 1e-12);
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.1 + 0.2, -1e-300, 123456.789e10, std::f64::consts::PI] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(f64::NAN), "");
    }
}
