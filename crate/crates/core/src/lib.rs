//! Patient-wise machine unlearning toolkit.
//!
//! Removing one patient's influence from a trained classifier, short of
//! retraining from scratch, is done here by perturbing weights with
//! curvature-scaled noise. The crate implements and contrasts two such
//! operators, together with everything needed to evaluate them honestly:
//!
//! * [`forget::scrub`] adds noise scaled by the inverse fourth root of the
//!   retain-set Fisher diagonal, degrading whatever the remaining patients
//!   do not rely on.
//! * [`forget::targeted_forget`] adds noise scaled by the positive fourth
//!   root of the forget-set Fisher diagonal, restricted to the small
//!   fraction of weights most informative about the forgotten patient.
//! * [`oracle::golden_retrain`] produces the golden standard — a model
//!   retrained without the patient — and [`oracle::leave_one_out_sweep`]
//!   classifies every patient as a common-cluster or an edge case by how
//!   badly its golden model fails on it.
//! * [`forget::calibrate`] searches the noise strength until the error on
//!   the forgotten patient reaches a named level (Low / Medium / High).
//!
//! Everything is seeded and deterministic: same inputs, same bytes out,
//! regardless of worker counts.

pub mod checkpoint;
pub mod data;
pub mod error;
pub mod eval;
pub mod fisher;
pub mod forget;
pub mod model;
pub mod oracle;
pub mod parallel;
pub mod report;
pub mod rng;
pub mod train;

pub use checkpoint::{file_hash, load_checkpoint, save_checkpoint, Checkpoint};
pub use data::{
    generate, load_dataset, load_manifest, save_dataset, save_manifest, DatasetView, ForgetSplit,
    GroundTruthManifest, Hypothesis, HypothesisLabel, HypothesisSource, PatientDataset, PatientId,
    PatientRecord, Sample, Split, SynthSpec,
};
pub use error::{Error, Result};
pub use eval::{evaluate, EvalResult};
pub use fisher::{
    fim_diag_patient, fim_diag_sample, fim_diag_set, fim_diag_set_with, load_fim, save_fim,
    ClassExpectation, FimDiagonal, FimDumpMeta, FimSource, PatientNorm,
};
pub use forget::{
    calibrate, forget_and_report, relative_strength, scrub, targeted_forget, Calibration,
    CalibrationOptions, CalibrationProbe, ForgettingReport, GoldenComparison, NoiseLevel,
    NoiseLevelSpec, NoiseMode, PerturbMethod, PerturbReport, PerturbSpec, SplitErrors,
};
pub use model::{forward, init_weights, loss_and_grad, Activation, ModelArch, WeightVector};
pub use oracle::{
    classify_hypothesis, golden_retrain, leave_one_out_sweep, GoldenRecord, Histogram,
    SeedPolicy, SweepFailure, SweepOptions, SweepOutcome, SweepRecord,
};
pub use report::{
    load_json, save_json, CalibrationSummary, RowStats, RunReportFile, RunRow, SweepReportFile,
};
pub use train::{train, TrainConfig};
