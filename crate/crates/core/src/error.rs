//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("architecture mismatch: {0}")]
    ArchMismatch(String),

    #[error("empty batch")]
    EmptyBatch,

    #[error("empty dataset view")]
    EmptyView,

    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("unknown patient {0}")]
    UnknownPatient(String),

    #[error("patient {0} belongs to the test split")]
    TestPatient(String),

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error(
        "calibration did not converge after {iterations} probes \
         (band [{band_lo:.4}, {band_hi:.4}], last error {last_error:.4})"
    )]
    CalibrationNoConverge {
        iterations: usize,
        band_lo: f64,
        band_hi: f64,
        last_error: f64,
    },

    #[error(
        "target band [{band_lo:.4}, {band_hi:.4}] unreachable: \
         forget-set error saturates at {saturation:.4}"
    )]
    BandUnreachable {
        band_lo: f64,
        band_hi: f64,
        saturation: f64,
    },

    #[error("schema violation at line {line}: {message}")]
    Schema { line: usize, message: String },

    #[error("unsupported file version {found} (expected {expected})")]
    FileVersion { found: u32, expected: u32 },

    #[error("corrupt file: {0}")]
    CorruptFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
