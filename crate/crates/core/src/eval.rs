//! Error-rate evaluation (error = 1 - accuracy), overall and per patient.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{DatasetView, PatientId};
use crate::error::{Error, Result};
use crate::model::{forward, WeightVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    /// `1 - correct / n_samples`, computed in exactly that form.
    pub error: f64,
    pub per_patient_error: BTreeMap<PatientId, f64>,
    pub n_samples: usize,
}

/// Index of the largest probability; ties resolve to the lowest class index.
pub fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

/// Classify every sample in the view by argmax probability.
pub fn evaluate(w: &WeightVector, view: &DatasetView<'_>) -> Result<EvalResult> {
    if view.is_empty() {
        return Err(Error::EmptyView);
    }
    let mut per_patient = BTreeMap::new();
    let mut correct_total = 0usize;
    let mut n_total = 0usize;
    for (id, samples) in view.patients() {
        let mut correct = 0usize;
        for s in samples.iter() {
            let probs = forward(w, &s.features)?;
            if argmax(&probs) == s.label {
                correct += 1;
            }
        }
        correct_total += correct;
        n_total += samples.len();
        per_patient.insert(
            (*id).clone(),
            1.0 - correct as f64 / samples.len() as f64,
        );
    }
    Ok(EvalResult {
        error: 1.0 - correct_total as f64 / n_total as f64,
        per_patient_error: per_patient,
        n_samples: n_total,
    })
}
