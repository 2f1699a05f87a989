//! Self-describing report files.
//!
//! Every machine-readable output carries a schema version, the tool
//! version, and an echo of the exact resolved configuration that produced
//! it. All maps are ordered and all derived randomness is seeded, so a
//! report is byte-identical across reruns and worker counts; wall-clock
//! timings are the one non-deterministic field and live in a single
//! well-known place so comparisons can drop them.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::forget::{CalibrationProbe, ForgettingReport, NoiseLevel, PerturbMethod};
use crate::oracle::{Histogram, SweepFailure, SweepRecord};

pub const SCHEMA_VERSION: u32 = 1;

pub fn tool_version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}

/// Leave-one-out sweep output: one record per patient plus the histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReportFile {
    pub schema_version: u32,
    pub kind: String,
    pub tool_version: String,
    /// Exact resolved configuration of the run.
    pub config: serde_json::Value,
    pub records: Vec<SweepRecord>,
    pub failures: Vec<SweepFailure>,
    pub histogram: Histogram,
    pub edge_proportion: f64,
    pub threshold: f64,
    pub epochs: usize,
}

pub const SWEEP_KIND: &str = "sweep";
pub const FORGET_KIND: &str = "forget";

/// Summary statistics over the trial axis of one report row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RowStats {
    pub df_error: f64,
    pub dr_error: f64,
    pub test_error: f64,
    pub noise_all_weights: f64,
    pub noise_perturbed_weights: f64,
}

impl RowStats {
    fn extract(r: &ForgettingReport) -> [f64; 5] {
        [
            r.post.forget,
            r.post.retain,
            r.post.test,
            r.noise.mean_abs_noise_all_weights,
            r.noise.mean_abs_noise_perturbed_weights,
        ]
    }

    fn from_values(v: [f64; 5]) -> Self {
        Self {
            df_error: v[0],
            dr_error: v[1],
            test_error: v[2],
            noise_all_weights: v[3],
            noise_perturbed_weights: v[4],
        }
    }

    /// Mean over trials.
    pub fn mean_of(trials: &[ForgettingReport]) -> Option<Self> {
        if trials.is_empty() {
            return None;
        }
        let n = trials.len() as f64;
        let mut acc = [0.0; 5];
        for t in trials {
            for (a, v) in acc.iter_mut().zip(Self::extract(t)) {
                *a += v / n;
            }
        }
        Some(Self::from_values(acc))
    }

    /// Sample standard deviation over trials; zero for a single trial.
    pub fn std_of(trials: &[ForgettingReport]) -> Option<Self> {
        let mean = Self::mean_of(trials)?;
        if trials.len() < 2 {
            return Some(Self::from_values([0.0; 5]));
        }
        let n = trials.len() as f64;
        let mean_v = Self::extract_stats(&mean);
        let mut acc = [0.0; 5];
        for t in trials {
            for ((a, v), m) in acc.iter_mut().zip(Self::extract(t)).zip(mean_v) {
                *a += (v - m) * (v - m);
            }
        }
        for a in acc.iter_mut() {
            *a = (*a / (n - 1.0)).sqrt();
        }
        Some(Self::from_values(acc))
    }

    fn extract_stats(s: &Self) -> [f64; 5] {
        [
            s.df_error,
            s.dr_error,
            s.test_error,
            s.noise_all_weights,
            s.noise_perturbed_weights,
        ]
    }
}

/// Calibration result embedded in a report row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSummary {
    pub strength: f64,
    pub mean_df_error: f64,
    pub trace: Vec<CalibrationProbe>,
}

/// One (patient, method, level) cell of a forgetting run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub patient: String,
    pub method: PerturbMethod,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub level: Option<NoiseLevel>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub calibration: Option<CalibrationSummary>,
    pub trials: Vec<ForgettingReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean: Option<RowStats>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub std_dev: Option<RowStats>,
    /// Set when this cell failed (e.g. calibration did not converge); the
    /// rest of the run carries on.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

/// Forgetting-run output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReportFile {
    pub schema_version: u32,
    pub kind: String,
    pub tool_version: String,
    /// Exact resolved configuration of the run.
    pub config: serde_json::Value,
    /// Rows keyed uniquely by (patient, method, level), in that sort order.
    pub rows: Vec<RunRow>,
    /// Wall-clock seconds per phase. Excluded from determinism comparisons;
    /// everything else in the file is reproducible byte for byte.
    pub timings: BTreeMap<String, f64>,
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let reader = BufReader::new(File::open(path)?);
    Ok(serde_json::from_reader(reader)?)
}
