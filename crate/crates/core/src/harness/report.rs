use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::config::{ExperimentConfig, ExperimentKind};
use crate::error::{Error, Result};
use crate::numeric::stats::log_log_fit;

/// One sweep point. `values` follows [`RunReport::columns`]; a failed point
/// keeps its error message and no values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub sweep: f64,
    pub values: Vec<Option<f64>>,
    pub error: Option<String>,
}

/// Log-log fit of a metric against the sweep variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub metric: String,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_stderr: f64,
    /// Two-sided 95% Student-t interval for the slope.
    pub ci_low: f64,
    pub ci_high: f64,
    pub points: usize,
}

impl FitSummary {
    /// Fits `log y` against `log x`; `None` with fewer than two points.
    pub fn log_log(metric: &str, xs: &[f64], ys: &[f64]) -> Option<FitSummary> {
        let fit = log_log_fit(xs, ys).ok()?;
        let dof = xs.len().saturating_sub(2);
        let half = if dof > 0 && fit.slope_stderr > 0.0 {
            let t = StudentsT::new(0.0, 1.0, dof as f64).ok()?.inverse_cdf(0.975);
            t * fit.slope_stderr
        } else {
            0.0
        };
        Some(FitSummary {
            metric: metric.to_string(),
            slope: fit.slope,
            intercept: fit.intercept,
            r_squared: fit.r_squared,
            slope_stderr: fit.slope_stderr,
            ci_low: fit.slope - half,
            ci_high: fit.slope + half,
            points: xs.len(),
        })
    }
}

/// Pass/fail verdict on one named invariant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub name: String,
    /// The property checked, in words.
    pub invariant: String,
    pub passed: bool,
    /// The measured quantity, when there is one.
    pub value: Option<f64>,
}

impl Gate {
    pub fn new(name: &str, invariant: impl Into<String>, passed: bool, value: Option<f64>) -> Self {
        Gate {
            name: name.to_string(),
            invariant: invariant.into(),
            passed,
            value,
        }
    }
}

/// Timing and random-number provenance. Timing fields are the only part
/// of a report that differs between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub version: String,
    pub rng: String,
    pub seed: Option<u64>,
    pub wall_clock_seconds: f64,
    /// Seconds spent on each row, in row order.
    pub row_seconds: Vec<f64>,
}

/// Self-contained result of one run: re-running [`RunReport::config`]
/// reproduces it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub kind: ExperimentKind,
    pub config: BTreeMap<String, String>,
    /// Sweep variable name (first CSV column).
    pub sweep: String,
    /// Metric column names, after the sweep column.
    pub columns: Vec<String>,
    /// Sorted by the sweep variable.
    pub rows: Vec<ReportRow>,
    pub fits: Vec<FitSummary>,
    /// Scalar results that are not per-row (calibrated constants,
    /// predicted exponents, spreads).
    pub summary: BTreeMap<String, f64>,
    pub gates: Vec<Gate>,
    pub meta: RunMeta,
}

impl RunReport {
    pub fn all_passed(&self) -> bool {
        self.gates.iter().all(|g| g.passed)
    }

    pub fn gate(&self, name: &str) -> Option<&Gate> {
        self.gates.iter().find(|g| g.name == name)
    }

    pub fn fit(&self, metric: &str) -> Option<&FitSummary> {
        self.fits.iter().find(|f| f.metric == metric)
    }

    /// Re-validates the echoed configuration.
    pub fn config(&self) -> Result<ExperimentConfig> {
        ExperimentConfig::from_pairs(self.config.clone())
    }

    /// `(sweep, value)` over rows where the metric is present.
    pub fn series(&self, metric: &str) -> Result<Vec<(f64, f64)>> {
        let col = self.columns.iter().position(|c| c == metric).ok_or_else(|| {
            Error::Argument(format!(
                "unknown metric {metric:?}; available: {}",
                self.columns.join(", ")
            ))
        })?;
        Ok(self
            .rows
            .iter()
            .filter_map(|r| r.values.get(col).copied().flatten().map(|v| (r.sweep, v)))
            .collect())
    }

    pub fn csv_header(&self) -> String {
        csv_header(&self.sweep, &self.columns)
    }

    /// Header plus every row; the byte-deterministic part of a run.
    pub fn to_csv(&self) -> String {
        let mut out = self.csv_header();
        for row in &self.rows {
            out.push_str(&csv_line(row));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Writes the JSON form to a temporary sibling and renames it into
    /// place, so readers never see a partial report.
    pub fn write_json_atomic(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("json.partial");
        {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(self.to_json()?.as_bytes())?;
            f.sync_all()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }
}

pub(crate) fn csv_header(sweep: &str, columns: &[String]) -> String {
    let mut cols = vec![sweep.to_string()];
    cols.extend(columns.iter().cloned());
    cols.push("error".into());
    cols.join(",") + "\n"
}

/// Shortest round-trip decimal; scientific notation outside `[1e-4, 1e15)`.
pub(crate) fn format_number(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub(crate) fn csv_line(row: &ReportRow) -> String {
    let mut fields = vec![format_number(row.sweep)];
    fields.extend(row.values.iter().map(|v| v.map(format_number).unwrap_or_default()));
    fields.push(match &row.error {
        Some(e) => format!("\"{}\"", e.replace(['\n', '\r'], " ").replace('"', "\"\"")),
        None => String::new(),
    });
    fields.join(",") + "\n"
}
