//! Patient-grouped datasets and the forget/retain split algebra.
//!
//! Samples are grouped by patient; forgetting operates on whole patients.
//! Datasets are immutable once constructed, and split views borrow rather
//! than copy, so they are cheap and safe to share across workers.

mod io;
mod synth;

pub use io::{load_dataset, load_manifest, save_dataset, save_manifest};
pub use synth::{
    generate, GroundTruthManifest, Hypothesis, HypothesisLabel, HypothesisSource, PatientRecord,
    SynthSpec,
};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Patient identifier. Ordering is lexicographic; every deterministic
/// iteration in the crate walks patients in this order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PatientId(pub String);

impl PatientId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PatientId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for PatientId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

/// One labeled feature vector belonging to a patient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: usize,
    pub patient_id: PatientId,
}

/// Which half of the train/test partition a patient belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Labeled samples grouped by patient, with a train/test partition.
///
/// Invariants enforced at construction: sample features match `input_dim`
/// and are finite, labels are in range, each sample's `patient_id` matches
/// its map key, train and test patient ids are disjoint, no patient is
/// empty, and all samples of one patient carry the same label (one
/// diagnosis per patient).
#[derive(Debug, Clone, PartialEq)]
pub struct PatientDataset {
    train: BTreeMap<PatientId, Vec<Sample>>,
    test: BTreeMap<PatientId, Vec<Sample>>,
    pub num_classes: usize,
    pub input_dim: usize,
}

impl PatientDataset {
    pub fn new(
        train: BTreeMap<PatientId, Vec<Sample>>,
        test: BTreeMap<PatientId, Vec<Sample>>,
        num_classes: usize,
        input_dim: usize,
    ) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::InvalidSpec("num_classes must be >= 2".into()));
        }
        if input_dim == 0 {
            return Err(Error::InvalidSpec("input_dim must be >= 1".into()));
        }
        for (id, samples) in train.iter().chain(test.iter()) {
            if samples.is_empty() {
                return Err(Error::InvalidSpec(format!("patient {id} has no samples")));
            }
            let label = samples[0].label;
            for s in samples {
                if &s.patient_id != id {
                    return Err(Error::InvalidSpec(format!(
                        "sample under patient {id} carries patient_id {}",
                        s.patient_id
                    )));
                }
                if s.label >= num_classes {
                    return Err(Error::LabelOutOfRange {
                        label: s.label,
                        num_classes,
                    });
                }
                if s.label != label {
                    return Err(Error::InvalidSpec(format!(
                        "patient {id} mixes labels {label} and {}",
                        s.label
                    )));
                }
                if s.features.len() != input_dim {
                    return Err(Error::DimensionMismatch {
                        expected: input_dim,
                        got: s.features.len(),
                    });
                }
                if !s.features.iter().all(|v| v.is_finite()) {
                    return Err(Error::NonFinite("sample features"));
                }
            }
        }
        if let Some(id) = train.keys().find(|id| test.contains_key(*id)) {
            return Err(Error::InvalidSpec(format!(
                "patient {id} appears in both train and test"
            )));
        }
        Ok(Self {
            train,
            test,
            num_classes,
            input_dim,
        })
    }

    pub fn train_patients(&self) -> &BTreeMap<PatientId, Vec<Sample>> {
        &self.train
    }

    pub fn test_patients(&self) -> &BTreeMap<PatientId, Vec<Sample>> {
        &self.test
    }

    pub fn train_patient_ids(&self) -> impl Iterator<Item = &PatientId> {
        self.train.keys()
    }

    /// Label of a patient (all samples agree by invariant).
    pub fn label_of(&self, id: &PatientId) -> Option<usize> {
        self.train
            .get(id)
            .or_else(|| self.test.get(id))
            .map(|s| s[0].label)
    }

    pub fn n_train_samples(&self) -> usize {
        self.train.values().map(Vec::len).sum()
    }

    pub fn train_view(&self) -> DatasetView<'_> {
        DatasetView::over(&self.train)
    }

    pub fn test_view(&self) -> DatasetView<'_> {
        DatasetView::over(&self.test)
    }

    /// Split the training set into the forget patient's samples and the
    /// retained complement. Errors on unknown ids; a test patient cannot be
    /// forgotten because it never influenced the model.
    pub fn make_forget_split(&self, patient: &PatientId) -> Result<ForgetSplit<'_>> {
        if !self.train.contains_key(patient) {
            if self.test.contains_key(patient) {
                return Err(Error::TestPatient(patient.to_string()));
            }
            return Err(Error::UnknownPatient(patient.to_string()));
        }
        let mut forget = Vec::new();
        let mut retain = Vec::new();
        for (id, samples) in &self.train {
            if id == patient {
                forget.push((id, samples.as_slice()));
            } else {
                retain.push((id, samples.as_slice()));
            }
        }
        Ok(ForgetSplit {
            forget_patient: patient.clone(),
            d_f: DatasetView { patients: forget },
            d_r: DatasetView { patients: retain },
        })
    }
}

/// Borrowed, patient-ordered view over a set of patients.
#[derive(Debug, Clone)]
pub struct DatasetView<'a> {
    /// Sorted by patient id (inherited from the `BTreeMap` order).
    patients: Vec<(&'a PatientId, &'a [Sample])>,
}

impl<'a> DatasetView<'a> {
    fn over(map: &'a BTreeMap<PatientId, Vec<Sample>>) -> Self {
        Self {
            patients: map.iter().map(|(id, s)| (id, s.as_slice())).collect(),
        }
    }

    pub fn patients(&self) -> &[(&'a PatientId, &'a [Sample])] {
        &self.patients
    }

    pub fn n_patients(&self) -> usize {
        self.patients.len()
    }

    pub fn n_samples(&self) -> usize {
        self.patients.iter().map(|(_, s)| s.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.patients.is_empty()
    }

    pub fn samples(&self) -> impl Iterator<Item = &'a Sample> + '_ {
        self.patients.iter().flat_map(|(_, s)| s.iter())
    }
}

/// One patient's samples versus everything else in the training set.
#[derive(Debug, Clone)]
pub struct ForgetSplit<'a> {
    pub forget_patient: PatientId,
    pub d_f: DatasetView<'a>,
    pub d_r: DatasetView<'a>,
}
