//! Dataset and manifest files.
//!
//! Datasets are line-delimited JSON: a header record opens each split
//! section and carries `num_classes`, `input_dim`, and the split tag; the
//! sample records that follow belong to that split. Floats round-trip
//! bit-exactly through the shortest-representation printer, so
//! save-then-load is the identity on the data model.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::SCHEMA_VERSION;

use super::{GroundTruthManifest, PatientDataset, PatientId, Sample, Split};

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
enum DatasetLine {
    Header {
        schema_version: u32,
        num_classes: usize,
        input_dim: usize,
        split: Split,
    },
    Sample {
        patient_id: PatientId,
        label: usize,
        features: Vec<f64>,
    },
}

fn schema_err(line: usize, message: impl Into<String>) -> Error {
    Error::Schema {
        line,
        message: message.into(),
    }
}

pub fn save_dataset(ds: &PatientDataset, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for (split, patients) in [
        (Split::Train, ds.train_patients()),
        (Split::Test, ds.test_patients()),
    ] {
        let header = DatasetLine::Header {
            schema_version: SCHEMA_VERSION,
            num_classes: ds.num_classes,
            input_dim: ds.input_dim,
            split,
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        for samples in patients.values() {
            for s in samples {
                let line = DatasetLine::Sample {
                    patient_id: s.patient_id.clone(),
                    label: s.label,
                    features: s.features.clone(),
                };
                serde_json::to_writer(&mut out, &line)?;
                out.write_all(b"\n")?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<PatientDataset> {
    let reader = BufReader::new(File::open(path)?);
    let mut train: BTreeMap<PatientId, Vec<Sample>> = BTreeMap::new();
    let mut test: BTreeMap<PatientId, Vec<Sample>> = BTreeMap::new();
    // (num_classes, input_dim) once the first header is seen.
    let mut shape: Option<(usize, usize)> = None;
    let mut current: Option<Split> = None;
    // Patient id -> (label, first line) for the one-diagnosis invariant.
    let mut labels: BTreeMap<PatientId, (usize, usize)> = BTreeMap::new();

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: DatasetLine = serde_json::from_str(&line)
            .map_err(|e| schema_err(lineno, format!("unparseable record: {e}")))?;
        match parsed {
            DatasetLine::Header {
                schema_version,
                num_classes,
                input_dim,
                split,
            } => {
                if schema_version != SCHEMA_VERSION {
                    return Err(Error::FileVersion {
                        found: schema_version,
                        expected: SCHEMA_VERSION,
                    });
                }
                match shape {
                    None => shape = Some((num_classes, input_dim)),
                    Some(s) if s != (num_classes, input_dim) => {
                        return Err(schema_err(
                            lineno,
                            "header disagrees with an earlier header on num_classes/input_dim",
                        ));
                    }
                    _ => {}
                }
                current = Some(split);
            }
            DatasetLine::Sample {
                patient_id,
                label,
                features,
            } => {
                let split = current
                    .ok_or_else(|| schema_err(lineno, "sample record before any header"))?;
                let (num_classes, input_dim) = shape.expect("header seen");
                if label >= num_classes {
                    return Err(schema_err(
                        lineno,
                        format!("label {label} out of range for {num_classes} classes"),
                    ));
                }
                if features.len() != input_dim {
                    return Err(schema_err(
                        lineno,
                        format!(
                            "feature vector has length {}, header says {input_dim}",
                            features.len()
                        ),
                    ));
                }
                if !features.iter().all(|v| v.is_finite()) {
                    return Err(schema_err(lineno, "non-finite feature value"));
                }
                match labels.get(&patient_id) {
                    None => {
                        labels.insert(patient_id.clone(), (label, lineno));
                    }
                    Some(&(prev, first_line)) if prev != label => {
                        return Err(schema_err(
                            lineno,
                            format!(
                                "patient {patient_id} has label {label} here but label {prev} \
                                 at line {first_line}; one diagnosis per patient"
                            ),
                        ));
                    }
                    _ => {}
                }
                let map = match split {
                    Split::Train => &mut train,
                    Split::Test => &mut test,
                };
                map.entry(patient_id.clone()).or_default().push(Sample {
                    features,
                    label,
                    patient_id,
                });
            }
        }
    }

    let (num_classes, input_dim) =
        shape.ok_or_else(|| schema_err(0, "file contains no header record"))?;
    PatientDataset::new(train, test, num_classes, input_dim)
}

pub fn save_manifest(manifest: &GroundTruthManifest, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, manifest)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn load_manifest(path: &Path) -> Result<GroundTruthManifest> {
    let reader = BufReader::new(File::open(path)?);
    Ok(serde_json::from_reader(reader)?)
}
