//! Golden-standard retraining and the leave-one-patient-out experiment.
//!
//! The golden standard for forgetting a patient is a model retrained from
//! scratch on everyone else. Measuring the forgotten patient's error on its
//! golden model separates the two sub-population hypotheses: a patient the
//! golden model still classifies well resembles a common cluster; one it
//! fails on is an edge case. The sweep runs this for every training patient
//! and histograms the golden errors.

use serde::{Deserialize, Serialize};

use crate::data::{Hypothesis, HypothesisLabel, HypothesisSource, PatientDataset, PatientId};
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::model::{init_weights, ModelArch, WeightVector};
use crate::parallel;
use crate::rng;
use crate::train::{train, TrainConfig};

/// Error threshold above which a patient counts as an edge case.
pub const DEFAULT_EDGE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenRecord {
    pub forget_patient: PatientId,
    /// Error of the forgotten patient's samples on its golden model.
    pub golden_df_error: f64,
    /// Golden model error on the unchanged test split.
    pub golden_test_error: f64,
    pub epochs_used: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[derive(Default)]
pub enum SeedPolicy {
    /// Every retrain initializes from a seed derived from the patient id.
    #[default]
    PerPatient,
    /// Every retrain reuses the base training seed.
    ReuseBase,
}


fn retrain_seed(cfg: &TrainConfig, patient: &PatientId, policy: SeedPolicy) -> u64 {
    match policy {
        SeedPolicy::PerPatient => rng::mix_str(rng::mix_str(cfg.seed, "golden"), patient.as_str()),
        SeedPolicy::ReuseBase => cfg.seed,
    }
}

/// Retrain from scratch on everyone except `patient` and measure how the
/// golden model treats the held-out patient. The test split is untouched by
/// the forget split, so `golden_test_error` is measured on the identical
/// test set as the original model's.
pub fn golden_retrain(
    ds: &PatientDataset,
    patient: &PatientId,
    arch: &ModelArch,
    cfg: &TrainConfig,
) -> Result<(WeightVector, GoldenRecord)> {
    golden_retrain_with_policy(ds, patient, arch, cfg, SeedPolicy::default())
}

pub fn golden_retrain_with_policy(
    ds: &PatientDataset,
    patient: &PatientId,
    arch: &ModelArch,
    cfg: &TrainConfig,
    policy: SeedPolicy,
) -> Result<(WeightVector, GoldenRecord)> {
    let split = ds.make_forget_split(patient)?;
    let seed = retrain_seed(cfg, patient, policy);
    let init = init_weights(arch, seed)?;
    let mut train_cfg = cfg.clone();
    train_cfg.seed = seed;
    let golden = train(&split.d_r, &train_cfg, &init)?;
    let golden_df_error = evaluate(&golden, &split.d_f)?.error;
    let golden_test_error = evaluate(&golden, &ds.test_view())?.error;
    Ok((
        golden,
        GoldenRecord {
            forget_patient: patient.clone(),
            golden_df_error,
            golden_test_error,
            epochs_used: cfg.epochs,
            seed,
        },
    ))
}

/// Pure threshold rule: edge iff the golden error strictly exceeds the
/// threshold, so exactly 0.5 classifies as cluster.
pub fn classify_hypothesis(rec: &GoldenRecord, threshold: f64) -> HypothesisLabel {
    let value = if rec.golden_df_error > threshold {
        Hypothesis::Edge
    } else {
        Hypothesis::Cluster
    };
    HypothesisLabel {
        value,
        source: HypothesisSource::GoldenModel,
    }
}

/// Golden-error histogram in five-point bins over [0, 100] percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// 0, 5, ..., 100.
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
}

pub const HISTOGRAM_BINS: usize = 20;

impl Histogram {
    pub fn from_errors(errors: &[f64]) -> Self {
        let mut counts = vec![0usize; HISTOGRAM_BINS];
        for &e in errors {
            let pct = (e * 100.0).clamp(0.0, 100.0);
            let idx = ((pct / 5.0).floor() as usize).min(HISTOGRAM_BINS - 1);
            counts[idx] += 1;
        }
        Self {
            bin_edges: (0..=HISTOGRAM_BINS).map(|i| i as f64 * 5.0).collect(),
            counts,
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    #[serde(flatten)]
    pub golden: GoldenRecord,
    pub hypothesis: Hypothesis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub patient: PatientId,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    /// One record per completed retrain, in patient-id order.
    pub records: Vec<SweepRecord>,
    /// Patients whose retrain failed; the sweep continues past them.
    pub failures: Vec<SweepFailure>,
    pub histogram: Histogram,
    /// Fraction of completed retrains classified as edge cases.
    pub edge_proportion: f64,
    pub threshold: f64,
    pub epochs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub threshold: f64,
    pub workers: usize,
    pub seed_policy: SeedPolicy,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_EDGE_THRESHOLD,
            workers: 1,
            seed_policy: SeedPolicy::PerPatient,
        }
    }
}

/// One golden retrain per training patient. Per-patient seeds are derived
/// from the base seed and the patient id, and results merge in patient-id
/// order, so the outcome is identical for any worker count.
pub fn leave_one_out_sweep(
    ds: &PatientDataset,
    arch: &ModelArch,
    cfg: &TrainConfig,
    opts: &SweepOptions,
) -> Result<SweepOutcome> {
    let patients: Vec<PatientId> = ds.train_patient_ids().cloned().collect();
    if patients.len() < 2 {
        return Err(Error::InvalidSpec(
            "leave-one-out needs at least two training patients".into(),
        ));
    }
    let outcomes = parallel::run_indexed(patients.len(), opts.workers, |i| {
        let patient = &patients[i];
        golden_retrain_with_policy(ds, patient, arch, cfg, opts.seed_policy)
            .map(|(_, rec)| rec)
            .map_err(|e| (patient.clone(), e.to_string()))
    });

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(golden) => {
                let hypothesis = classify_hypothesis(&golden, opts.threshold).value;
                records.push(SweepRecord { golden, hypothesis });
            }
            Err((patient, error)) => failures.push(SweepFailure { patient, error }),
        }
    }
    let errors: Vec<f64> = records.iter().map(|r| r.golden.golden_df_error).collect();
    let histogram = Histogram::from_errors(&errors);
    let edges = records
        .iter()
        .filter(|r| r.hypothesis == Hypothesis::Edge)
        .count();
    let edge_proportion = if records.is_empty() {
        0.0
    } else {
        edges as f64 / records.len() as f64
    };
    Ok(SweepOutcome {
        records,
        failures,
        histogram,
        edge_proportion,
        threshold: opts.threshold,
        epochs: cfg.epochs,
    })
}
