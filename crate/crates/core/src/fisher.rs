//! Diagonal Fisher information estimation with patient-level aggregation.
//!
//! The per-sample term takes the exact expectation over the label
//! distribution: `sum_k p(k|x) * grad log p(k|x)^2`, elementwise over the
//! flat parameter vector. A patient's diagonal is the mean over its
//! samples, and a set's diagonal is the mean over its patients, so a
//! patient with many images counts no more than a patient with few. Weights
//! that several patients rely on therefore aggregate large values, while
//! weights private to a single edge patient stay small.
//!
//! Means are taken by adjacent-pair tree summation followed by one
//! division. Doubling is exact in floating point and commutes with rounding
//! at every tree node, so duplicating each sample in place leaves the
//! result bit-identical; the tests rely on this.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{DatasetView, Sample};
use crate::error::{Error, Result};
use crate::model::{class_logprob_grads, WeightVector};
use crate::rng;

/// Which data the diagonal was computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FimSource {
    RetainSet,
    ForgetSet,
    SinglePatient,
}

/// Reading of "normalised per-patient FIM": divide by the patient's sample
/// count (default), or rescale each patient's diagonal to unit L1 mass
/// before the patient-level mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum PatientNorm {
    #[default]
    SampleMean,
    UnitL1,
}

/// Expectation over the label: exact class-weighted sum (default), or a
/// single Monte-Carlo label draw per sample for fidelity experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassExpectation {
    Exact,
    Sampled { seed: u64 },
}

/// Nonnegative per-weight curvature diagonal with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FimDiagonal {
    pub values: Vec<f64>,
    pub source: FimSource,
    pub n_patients: usize,
    pub arch_fingerprint: u64,
    pub patient_norm: PatientNorm,
}

impl FimDiagonal {
    /// The diagonal may only be combined with the weights it was computed
    /// for (same architecture, same length).
    pub fn check_matches(&self, w: &WeightVector) -> Result<()> {
        if self.arch_fingerprint != w.arch.fingerprint() {
            return Err(Error::ArchMismatch(format!(
                "curvature fingerprint {:016x} vs model {:016x}",
                self.arch_fingerprint,
                w.arch.fingerprint()
            )));
        }
        if self.values.len() != w.len() {
            return Err(Error::DimensionMismatch {
                expected: w.len(),
                got: self.values.len(),
            });
        }
        Ok(())
    }

    fn check_entries(&self) -> Result<()> {
        if self
            .values
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0)
        {
            Ok(())
        } else {
            Err(Error::NonFinite("fisher diagonal"))
        }
    }
}

/// Exact per-sample diagonal: `sum_k p(k|x) * grad log p(k|x)^2`.
pub fn fim_diag_sample(w: &WeightVector, x: &[f64]) -> Result<Vec<f64>> {
    let (probs, grads) = class_logprob_grads(w, x)?;
    let mut out = vec![0.0; w.len()];
    for (p, g) in probs.iter().zip(grads.iter()) {
        for (o, gi) in out.iter_mut().zip(g.iter()) {
            *o += p * gi * gi;
        }
    }
    if !out.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("per-sample fisher diagonal"));
    }
    Ok(out)
}

/// Single-draw variant: sample one label from `p(y|x)` and square its
/// gradient.
fn fim_diag_sample_drawn(
    w: &WeightVector,
    x: &[f64],
    stream: &mut rand_chacha::ChaCha8Rng,
) -> Result<Vec<f64>> {
    let (probs, grads) = class_logprob_grads(w, x)?;
    let u = rng::uniform(stream);
    let mut cume = 0.0;
    let mut drawn = probs.len() - 1;
    for (k, &p) in probs.iter().enumerate() {
        cume += p;
        if u < cume {
            drawn = k;
            break;
        }
    }
    let out: Vec<f64> = grads[drawn].iter().map(|g| g * g).collect();
    if !out.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("per-sample fisher diagonal"));
    }
    Ok(out)
}

/// Sum elementwise by reducing adjacent pairs level by level. Unlike a
/// running sum, a duplicated term list reduces to exactly twice the
/// original at every node of the tree.
fn pairwise_sum(mut terms: Vec<Vec<f64>>) -> Vec<f64> {
    while terms.len() > 1 {
        let mut next = Vec::with_capacity(terms.len().div_ceil(2));
        let mut it = terms.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
            }
            next.push(a);
        }
        terms = next;
    }
    terms.pop().unwrap_or_default()
}

fn pairwise_mean(terms: Vec<Vec<f64>>) -> Vec<f64> {
    let n = terms.len() as f64;
    let mut sum = pairwise_sum(terms);
    for v in sum.iter_mut() {
        *v /= n;
    }
    sum
}

fn patient_values(
    w: &WeightVector,
    samples: &[Sample],
    expectation: ClassExpectation,
    patient_tag: &str,
) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::EmptyView);
    }
    let mut terms = Vec::with_capacity(samples.len());
    match expectation {
        ClassExpectation::Exact => {
            for s in samples {
                terms.push(fim_diag_sample(w, &s.features)?);
            }
        }
        ClassExpectation::Sampled { seed } => {
            let mut stream = rng::substream(seed, patient_tag);
            for s in samples {
                terms.push(fim_diag_sample_drawn(w, &s.features, &mut stream)?);
            }
        }
    }
    Ok(pairwise_mean(terms))
}

/// Diagonal for one patient: mean of the per-sample diagonals.
pub fn fim_diag_patient(w: &WeightVector, samples: &[Sample]) -> Result<FimDiagonal> {
    let values = patient_values(w, samples, ClassExpectation::Exact, "")?;
    let fim = FimDiagonal {
        values,
        source: FimSource::SinglePatient,
        n_patients: 1,
        arch_fingerprint: w.arch.fingerprint(),
        patient_norm: PatientNorm::SampleMean,
    };
    fim.check_entries()?;
    Ok(fim)
}

/// Diagonal for a set of patients: mean of the per-patient diagonals, each
/// patient weighted equally.
pub fn fim_diag_set(
    w: &WeightVector,
    view: &DatasetView<'_>,
    source: FimSource,
) -> Result<FimDiagonal> {
    fim_diag_set_with(w, view, source, PatientNorm::default(), ClassExpectation::Exact)
}

pub fn fim_diag_set_with(
    w: &WeightVector,
    view: &DatasetView<'_>,
    source: FimSource,
    norm: PatientNorm,
    expectation: ClassExpectation,
) -> Result<FimDiagonal> {
    if view.is_empty() {
        return Err(Error::EmptyView);
    }
    let n_patients = view.n_patients();
    // Patients arrive sorted by id and samples in stored order, so the
    // reduction order is fixed no matter who computed the terms.
    let mut terms = Vec::with_capacity(n_patients);
    for (id, samples) in view.patients() {
        let mut per_patient = patient_values(w, samples, expectation, id.as_str())?;
        if norm == PatientNorm::UnitL1 {
            let mass: f64 = per_patient.iter().sum();
            if mass > 0.0 {
                for v in per_patient.iter_mut() {
                    *v /= mass;
                }
            }
        }
        terms.push(per_patient);
    }
    let fim = FimDiagonal {
        values: pairwise_mean(terms),
        source,
        n_patients,
        arch_fingerprint: w.arch.fingerprint(),
        patient_norm: norm,
    };
    fim.check_entries()?;
    Ok(fim)
}

/// Cache metadata stored in a diagonal dump so a cached retain-set diagonal
/// is only reused against the same checkpoint and split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FimDumpMeta {
    pub checkpoint_hash: u64,
    pub split_key: String,
}

const FIM_MAGIC: &[u8; 4] = b"UFIM";
const FIM_VERSION: u32 = 1;

fn source_code(s: FimSource) -> u8 {
    match s {
        FimSource::RetainSet => 0,
        FimSource::ForgetSet => 1,
        FimSource::SinglePatient => 2,
    }
}

fn source_from_code(c: u8) -> Result<FimSource> {
    match c {
        0 => Ok(FimSource::RetainSet),
        1 => Ok(FimSource::ForgetSet),
        2 => Ok(FimSource::SinglePatient),
        other => Err(Error::CorruptFile(format!("unknown source tag {other}"))),
    }
}

/// Write a diagonal dump: magic, version, fingerprint, source, norm,
/// n_patients, cache metadata, then the raw little-endian values.
pub fn save_fim(path: &Path, fim: &FimDiagonal, meta: &FimDumpMeta) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(FIM_MAGIC)?;
    out.write_all(&FIM_VERSION.to_le_bytes())?;
    out.write_all(&fim.arch_fingerprint.to_le_bytes())?;
    out.write_all(&[source_code(fim.source)])?;
    out.write_all(&[match fim.patient_norm {
        PatientNorm::SampleMean => 0u8,
        PatientNorm::UnitL1 => 1u8,
    }])?;
    out.write_all(&(fim.n_patients as u64).to_le_bytes())?;
    out.write_all(&meta.checkpoint_hash.to_le_bytes())?;
    let key = meta.split_key.as_bytes();
    out.write_all(&(key.len() as u32).to_le_bytes())?;
    out.write_all(key)?;
    out.write_all(&(fim.values.len() as u64).to_le_bytes())?;
    for v in &fim.values {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

fn read_exact<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

pub fn load_fim(path: &Path) -> Result<(FimDiagonal, FimDumpMeta)> {
    let mut r = BufReader::new(File::open(path)?);
    let magic: [u8; 4] = read_exact(&mut r)?;
    if &magic != FIM_MAGIC {
        return Err(Error::CorruptFile("bad magic bytes".into()));
    }
    let version = u32::from_le_bytes(read_exact(&mut r)?);
    if version != FIM_VERSION {
        return Err(Error::FileVersion {
            found: version,
            expected: FIM_VERSION,
        });
    }
    let arch_fingerprint = u64::from_le_bytes(read_exact(&mut r)?);
    let source = source_from_code(read_exact::<1>(&mut r)?[0])?;
    let patient_norm = match read_exact::<1>(&mut r)?[0] {
        0 => PatientNorm::SampleMean,
        1 => PatientNorm::UnitL1,
        other => {
            return Err(Error::CorruptFile(format!("unknown norm tag {other}")));
        }
    };
    let n_patients = u64::from_le_bytes(read_exact(&mut r)?) as usize;
    let checkpoint_hash = u64::from_le_bytes(read_exact(&mut r)?);
    let key_len = u32::from_le_bytes(read_exact(&mut r)?) as usize;
    let mut key = vec![0u8; key_len];
    r.read_exact(&mut key)?;
    let split_key = String::from_utf8(key)
        .map_err(|_| Error::CorruptFile("split key is not utf-8".into()))?;
    let n_values = u64::from_le_bytes(read_exact(&mut r)?) as usize;
    let mut values = Vec::with_capacity(n_values);
    for _ in 0..n_values {
        values.push(f64::from_le_bytes(read_exact(&mut r)?));
    }
    let fim = FimDiagonal {
        values,
        source,
        n_patients,
        arch_fingerprint,
        patient_norm,
    };
    fim.check_entries()?;
    Ok((
        fim,
        FimDumpMeta {
            checkpoint_hash,
            split_key,
        },
    ))
}
