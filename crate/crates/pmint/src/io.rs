//! Readers and writers for the on-disk formats.
//!
//! - panel CSV: header of series names, one row per time step;
//! - residuals CSV: same wide layout, preceded by a `#` comment line
//!   documenting the actual-minus-forecast convention;
//! - forecast CSV: long layout `series,h,mean`;
//! - reconciled distribution JSON;
//! - scores CSV: `method,h,replicate,energy_score,seed`.
//!
//! Floats are written in Rust's shortest round-trip notation, so
//! write-then-read reproduces every value bit-exactly.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::covariance::{KhMode, ResidualMatrix};
use crate::error::{Error, Result};
use crate::hierarchy::{aggregate_bottom, check_coherence, SeriesPanel, SummingMatrix};
use crate::reconcile::{Method, ReconciledDistribution};

fn parse_cell(raw: &str, file: &str, line: usize, col: &str) -> Result<f64> {
    raw.trim().parse::<f64>().map_err(|_| Error::Parse {
        file: file.into(),
        message: format!("line {line}: field '{col}' is not a number: '{raw}'"),
    })
}

/// Reads a wide CSV (header of names, one row per step) into a matrix.
/// Lines starting with `#` are skipped.
fn read_wide_csv(path: &Path) -> Result<(Vec<String>, DMatrix<f64>)> {
    let file_label = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)?;
    let names: Vec<String> = reader
        .headers()?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != names.len() {
            return Err(Error::Parse {
                file: file_label,
                message: format!(
                    "line {}: expected {} fields, got {}",
                    i + 2,
                    names.len(),
                    record.len()
                ),
            });
        }
        let mut row = Vec::with_capacity(names.len());
        for (j, cell) in record.iter().enumerate() {
            row.push(parse_cell(cell, &file_label, i + 2, &names[j])?);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            file: file_label,
            message: "no data rows".into(),
        });
    }
    let values = DMatrix::from_fn(rows.len(), names.len(), |r, c| rows[r][c]);
    Ok((names, values))
}

/// Maps observed column order onto a wanted order; errors name the first
/// missing series.
fn reorder_columns(
    names: &[String],
    values: &DMatrix<f64>,
    wanted: &[String],
) -> Result<DMatrix<f64>> {
    let index: HashMap<&str, usize> = names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    if index.len() != names.len() {
        let dup = names
            .iter()
            .find(|n| names.iter().filter(|o| o == n).count() > 1)
            .unwrap();
        return Err(Error::DuplicateName(dup.clone()));
    }
    let mut cols = Vec::with_capacity(wanted.len());
    for want in wanted {
        match index.get(want.as_str()) {
            Some(&i) => cols.push(i),
            None => return Err(Error::MissingSeries(want.clone())),
        }
    }
    Ok(DMatrix::from_fn(values.nrows(), wanted.len(), |r, c| {
        values[(r, cols[c])]
    }))
}

/// Coherence tolerance applied when ingesting full panels.
pub const INGEST_COHERENCE_TOL: f64 = 1e-8;

/// Loads a series panel. The header must be a permutation of the full
/// hierarchy names (checked coherent within [`INGEST_COHERENCE_TOL`]) or of
/// the bottom names alone, in which case the uppers are aggregated.
pub fn read_panel(path: &Path, s: &SummingMatrix) -> Result<SeriesPanel> {
    let (names, values) = read_wide_csv(path)?;
    let all = s.names();
    let bottoms = &all[s.uppers()..];
    if names.len() == all.len() {
        let values = reorder_columns(&names, &values, all)?;
        let panel = SeriesPanel {
            values,
            names: all.to_vec(),
        };
        let coherence = check_coherence(&panel, s, INGEST_COHERENCE_TOL)?;
        if !coherence.coherent {
            return Err(Error::Parse {
                file: path.display().to_string(),
                message: format!(
                    "panel is not coherent (max violation {:.3e} > {:.0e})",
                    coherence.max_violation, INGEST_COHERENCE_TOL
                ),
            });
        }
        Ok(panel)
    } else if names.len() == bottoms.len() {
        let values = reorder_columns(&names, &values, bottoms)?;
        aggregate_bottom(&values, s)
    } else {
        Err(Error::Parse {
            file: path.display().to_string(),
            message: format!(
                "header has {} series; expected all {} or the {} bottoms",
                names.len(),
                all.len(),
                bottoms.len()
            ),
        })
    }
}

/// Reads realized observations for scoring: wide CSV with one row per
/// horizon (`h = 1` first), columns reordered to the wanted names.
pub fn read_actuals(path: &Path, wanted: &[String]) -> Result<DMatrix<f64>> {
    let (names, values) = read_wide_csv(path)?;
    if names.len() != wanted.len() {
        return Err(Error::Parse {
            file: path.display().to_string(),
            message: format!(
                "actuals header has {} series, expected {}",
                names.len(),
                wanted.len()
            ),
        });
    }
    reorder_columns(&names, &values, wanted)
}

/// Writes a panel as wide CSV.
pub fn write_panel(path: &Path, panel: &SeriesPanel) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&panel.names)?;
    for r in 0..panel.values.nrows() {
        let row: Vec<String> = (0..panel.values.ncols())
            .map(|c| panel.values[(r, c)].to_string())
            .collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads residuals (wide CSV, `#` comments allowed) and reorders the
/// columns to the given hierarchy order.
pub fn read_residuals(path: &Path, wanted: &[String]) -> Result<ResidualMatrix> {
    let (names, values) = read_wide_csv(path)?;
    if names.len() != wanted.len() {
        return Err(Error::Parse {
            file: path.display().to_string(),
            message: format!(
                "residual header has {} series, hierarchy has {}",
                names.len(),
                wanted.len()
            ),
        });
    }
    let values = reorder_columns(&names, &values, wanted)?;
    ResidualMatrix::new(values, wanted.to_vec())
}

/// Writes residuals with the convention comment line.
pub fn write_residuals(path: &Path, r: &ResidualMatrix) -> Result<()> {
    let mut out = String::new();
    out.push_str("# one-step residuals, convention: actual - forecast\n");
    out.push_str(&r.names().join(","));
    out.push('\n');
    for row in 0..r.values().nrows() {
        let line: Vec<String> = (0..r.values().ncols())
            .map(|c| r.values()[(row, c)].to_string())
            .collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads long-format forecasts (`series,h,mean`) into an `H x m` matrix
/// ordered by the wanted names. Every series must provide exactly one mean
/// for each `h` in `1..=H`, with `H` shared by all series.
pub fn read_forecasts(path: &Path, wanted: &[String]) -> Result<DMatrix<f64>> {
    let file_label = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let expected = ["series", "h", "mean"];
    if headers.iter().map(str::trim).ne(expected) {
        return Err(Error::Parse {
            file: file_label,
            message: format!(
                "expected header 'series,h,mean', got '{}'",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut per_series: HashMap<String, HashMap<usize, f64>> = HashMap::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 2;
        if record.len() != 3 {
            return Err(Error::Parse {
                file: file_label,
                message: format!("line {line}: expected 3 fields"),
            });
        }
        let series = record[0].to_string();
        let h: usize = record[1].parse().map_err(|_| Error::Parse {
            file: file_label.clone(),
            message: format!(
                "line {line}: field 'h' is not a positive integer: '{}'",
                &record[1]
            ),
        })?;
        if h == 0 {
            return Err(Error::Parse {
                file: file_label,
                message: format!("line {line}: h must be >= 1"),
            });
        }
        let mean = parse_cell(&record[2], &file_label, line, "mean")?;
        if !mean.is_finite() {
            return Err(Error::NonFinite(format!("forecast for '{series}' at h={h}")));
        }
        if per_series
            .entry(series.clone())
            .or_default()
            .insert(h, mean)
            .is_some()
        {
            return Err(Error::DuplicateForecast { series, h });
        }
    }
    let horizon = per_series
        .values()
        .map(|hs| hs.len())
        .max()
        .ok_or_else(|| Error::Parse {
            file: file_label.clone(),
            message: "no data rows".into(),
        })?;
    let mut means = DMatrix::zeros(horizon, wanted.len());
    for (col, name) in wanted.iter().enumerate() {
        let hs = per_series
            .get(name)
            .ok_or_else(|| Error::MissingSeries(name.clone()))?;
        if hs.len() != horizon {
            return Err(Error::InconsistentHorizon(name.clone()));
        }
        for h in 1..=horizon {
            match hs.get(&h) {
                Some(&mean) => means[(h - 1, col)] = mean,
                None => return Err(Error::InconsistentHorizon(name.clone())),
            }
        }
    }
    Ok(means)
}

/// Writes forecasts in the long `series,h,mean` layout.
pub fn write_forecasts(path: &Path, names: &[String], means: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["series", "h", "mean"])?;
    for (col, name) in names.iter().enumerate() {
        for h in 0..means.nrows() {
            w.write_record([
                name.as_str(),
                &(h + 1).to_string(),
                &means[(h, col)].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Serialized form of a reconciled distribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconciledJson {
    /// Reconciliation method.
    pub method: Method,
    /// Forecast horizon the distribution refers to.
    pub h: usize,
    /// Horizon scaling convention.
    pub kh_mode: KhMode,
    /// Series names, hierarchy order.
    pub names: Vec<String>,
    /// Mean for the full hierarchy.
    pub mean: Vec<f64>,
    /// Row-major `m x m` covariance for the full hierarchy.
    pub covariance: Vec<f64>,
    /// Bottom mean.
    pub bottom_mean: Vec<f64>,
    /// Row-major `n x n` bottom covariance.
    pub bottom_covariance: Vec<f64>,
    /// Shrinkage intensity behind the covariance blocks, if estimated.
    pub shrink_lambda: Option<f64>,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.push(m[(r, c)]);
        }
    }
    out
}

impl ReconciledJson {
    /// Converts a distribution into its serialized form.
    pub fn from_distribution(dist: &ReconciledDistribution) -> Self {
        Self {
            method: dist.method,
            h: dist.h,
            kh_mode: dist.kh_mode,
            names: dist.names.clone(),
            mean: dist.full_mean.iter().copied().collect(),
            covariance: row_major(&dist.full_cov),
            bottom_mean: dist.bottom_mean.iter().copied().collect(),
            bottom_covariance: row_major(&dist.bottom_cov),
            shrink_lambda: dist.shrink_lambda,
        }
    }

    /// Rebuilds the in-memory distribution.
    pub fn into_distribution(self) -> Result<ReconciledDistribution> {
        let m = self.names.len();
        if self.mean.len() != m || self.covariance.len() != m * m {
            return Err(Error::DimensionMismatch {
                expected: format!("mean of length {m} and covariance of length {}", m * m),
                actual: format!("{} and {}", self.mean.len(), self.covariance.len()),
            });
        }
        let n = self.bottom_mean.len();
        if self.bottom_covariance.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: format!("bottom covariance of length {}", n * n),
                actual: format!("{}", self.bottom_covariance.len()),
            });
        }
        Ok(ReconciledDistribution {
            method: self.method,
            h: self.h,
            kh_mode: self.kh_mode,
            names: self.names,
            bottom_mean: DVector::from_vec(self.bottom_mean),
            bottom_cov: DMatrix::from_row_slice(n, n, &self.bottom_covariance),
            full_mean: DVector::from_vec(self.mean),
            full_cov: DMatrix::from_row_slice(m, m, &self.covariance),
            shrink_lambda: self.shrink_lambda,
        })
    }
}

/// Writes one reconciled distribution as pretty JSON.
pub fn write_reconciled(path: &Path, dist: &ReconciledDistribution) -> Result<()> {
    let json = serde_json::to_string_pretty(&ReconciledJson::from_distribution(dist))?;
    fs::write(path, json)?;
    Ok(())
}

/// Reads one reconciled distribution.
pub fn read_reconciled(path: &Path) -> Result<ReconciledDistribution> {
    let text = fs::read_to_string(path)?;
    let json: ReconciledJson = serde_json::from_str(&text)?;
    json.into_distribution()
}

/// One energy-score evaluation cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRow {
    /// Reconciliation method.
    pub method: Method,
    /// Forecast horizon.
    pub h: usize,
    /// Replicate index (0 for single-shot scoring).
    pub replicate: usize,
    /// Energy score (lower is better).
    pub energy_score: f64,
    /// Sub-seed the samples were drawn with.
    pub seed: u64,
}

/// Writes score rows as CSV (`method,h,replicate,energy_score,seed`).
pub fn write_scores(path: &Path, rows: &[ScoreRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["method", "h", "replicate", "energy_score", "seed"])?;
    for row in rows {
        w.write_record([
            row.method.to_string(),
            row.h.to_string(),
            row.replicate.to_string(),
            row.energy_score.to_string(),
            row.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the per-method mean energy scores (`method,mean_energy_score`).
pub fn write_summary(path: &Path, summary: &[(Method, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["method", "mean_energy_score"])?;
    for (method, mean) in summary {
        w.write_record([method.to_string(), mean.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Manifest written next to simulated replicate panels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationManifest {
    /// Master seed the replicates were derived from.
    pub seed: u64,
    /// Series length per replicate.
    pub t: usize,
    /// Number of replicates.
    pub replicates: usize,
    /// Observation-noise variance.
    pub eta_var: f64,
    /// True AR coefficients per replicate (one row of four per replicate).
    pub phi: Vec<Vec<f64>>,
    /// Panel file names, one per replicate.
    pub panels: Vec<String>,
}

/// Writes the simulation manifest as pretty JSON.
pub fn write_manifest(path: &Path, manifest: &SimulationManifest) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(serde_json::to_string_pretty(manifest)?.as_bytes())?;
    Ok(())
}
