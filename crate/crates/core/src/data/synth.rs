//! Synthetic patient-grouped classification data.
//!
//! Each class is a Gaussian cluster around a class centroid. A *cluster*
//! patient draws its mean inside that cluster (within `cluster_spread` of
//! the centroid); an *edge* patient is a rare presentation: its mean sits
//! at distance `edge_offset` from the centroid, in a direction that erases
//! the class signature, so no other patient resembles it. Edge patients are
//! drawn in the training split; test patients are cluster patients, which
//! makes test error a clean measure of how much shared structure a
//! forgetting operator destroys.
//!
//! All draws come from substreams keyed by patient index, so generation is
//! deterministic per seed and independent of evaluation order.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

use super::{PatientDataset, PatientId, Sample, Split};

/// Class centroids sit at `edge_offset * CENTROID_RADIUS_RATIO` from the
/// origin: far enough apart for clean clusters, close enough that an edge
/// displacement dominates the class signature.
const CENTROID_RADIUS_RATIO: f64 = 0.5;

/// An edge displacement points partly back through the centroid; its
/// alignment with the inward direction is drawn from this range. With the
/// centroid at half the edge offset, alignment a leaves a signature residue
/// of (1 - 2a) times the centroid: the lower bound keeps that residue at or
/// below zero (a model that never saw the patient has nothing to
/// recognize), the upper bound keeps the patient away from the
/// between-class region around the origin.
const EDGE_ANTI_ALIGNMENT: (f64, f64) = (0.55, 0.8);

/// Share of an edge displacement pointing toward a rival class: an atypical
/// presentation faintly resembles a different pathology, so a model that
/// never saw the patient misreads it the same way every time instead of
/// guessing. Small enough that the patient stays far outside the rival's
/// cluster.
const EDGE_RIVAL_SHARE: f64 = 0.35;

/// Resampling attempts when drawing mutually separated centroids.
const CENTROID_ATTEMPTS: usize = 64;

/// Which sub-population a patient was drawn from (or assigned to by the
/// golden-model classifier).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hypothesis {
    Edge,
    Cluster,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HypothesisSource {
    /// Only synthetic data has ground-truth labels.
    GroundTruth,
    GoldenModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisLabel {
    pub value: Hypothesis,
    pub source: HypothesisSource,
}

/// Generator parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub num_classes: usize,
    pub input_dim: usize,
    pub patients_per_class_train: usize,
    pub patients_test: usize,
    pub samples_per_patient: usize,
    /// Radius of patient means around their class centroid.
    pub cluster_spread: f64,
    /// Spread of a patient's samples around the patient mean.
    pub sample_spread: f64,
    /// Distance of an edge patient's mean from its class centroid.
    pub edge_offset: f64,
    /// Fraction of patients drawn as edge cases; floored to a count, with at
    /// least one edge patient whenever the fraction is positive.
    pub edge_fraction: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            num_classes: 5,
            input_dim: 32,
            patients_per_class_train: 18,
            patients_test: 10,
            samples_per_patient: 16,
            cluster_spread: 1.0,
            sample_spread: 0.25,
            edge_offset: 6.0,
            edge_fraction: 0.3,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::InvalidSpec("num_classes must be >= 2".into()));
        }
        // Edge displacements need room orthogonal to the centroid span.
        if self.input_dim <= self.num_classes {
            return Err(Error::InvalidSpec(
                "input_dim must exceed num_classes".into(),
            ));
        }
        if self.patients_per_class_train == 0 {
            return Err(Error::InvalidSpec(
                "patients_per_class_train must be >= 1".into(),
            ));
        }
        if self.samples_per_patient == 0 {
            return Err(Error::InvalidSpec("samples_per_patient must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.edge_fraction) {
            return Err(Error::InvalidSpec("edge_fraction must be in [0, 1]".into()));
        }
        let ordered = self.sample_spread > 0.0
            && self.sample_spread < self.cluster_spread
            && self.cluster_spread < self.edge_offset;
        if !ordered {
            return Err(Error::InvalidSpec(
                "spread ordering violated: need 0 < sample_spread < cluster_spread < edge_offset"
                    .into(),
            ));
        }
        Ok(())
    }

    pub fn n_train_patients(&self) -> usize {
        self.num_classes * self.patients_per_class_train
    }

    /// Edge-count rounding rule: floor of `fraction * count`, at least one
    /// when the fraction is positive and the count is nonzero.
    fn edge_count(&self, count: usize) -> usize {
        if self.edge_fraction <= 0.0 || count == 0 {
            return 0;
        }
        ((self.edge_fraction * count as f64).floor() as usize).max(1)
    }
}

/// Per-patient generation record kept alongside the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub hypothesis: Hypothesis,
    pub split: Split,
    pub class: usize,
}

/// Sidecar manifest emitted with a generated dataset: ground-truth
/// hypothesis per patient plus the generation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthManifest {
    pub schema_version: u32,
    pub spec: SynthSpec,
    pub patients: BTreeMap<PatientId, PatientRecord>,
}

impl GroundTruthManifest {
    pub fn hypothesis(&self, id: &PatientId) -> Option<HypothesisLabel> {
        self.patients.get(id).map(|r| HypothesisLabel {
            value: r.hypothesis,
            source: HypothesisSource::GroundTruth,
        })
    }
}

fn draw_centroids(spec: &SynthSpec) -> Result<Vec<Vec<f64>>> {
    let radius = spec.edge_offset * CENTROID_RADIUS_RATIO;
    // Blobs extend roughly cluster_spread plus a few sample spreads.
    let min_sep = 2.0 * (spec.cluster_spread + 2.0 * spec.sample_spread);
    let mut stream = rng::substream(spec.seed, "centroids");
    'attempt: for _ in 0..CENTROID_ATTEMPTS {
        let centroids: Vec<Vec<f64>> = (0..spec.num_classes)
            .map(|_| {
                let mut v = rng::unit_vector(&mut stream, spec.input_dim);
                for x in v.iter_mut() {
                    *x *= radius;
                }
                v
            })
            .collect();
        for i in 0..centroids.len() {
            for j in i + 1..centroids.len() {
                let d2: f64 = centroids[i]
                    .iter()
                    .zip(&centroids[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                if d2.sqrt() < min_sep {
                    continue 'attempt;
                }
            }
        }
        return Ok(centroids);
    }
    Err(Error::InvalidSpec(format!(
        "could not place {} separated class centroids in {} dimensions; \
         increase edge_offset or input_dim, or decrease cluster_spread",
        spec.num_classes, spec.input_dim
    )))
}

/// Patient mean inside the class cluster: uniform radius up to
/// `cluster_spread` along a random direction.
fn cluster_mean(spec: &SynthSpec, centroid: &[f64], stream: &mut rand_chacha::ChaCha8Rng) -> Vec<f64> {
    let dir = rng::unit_vector(stream, spec.input_dim);
    let r = rng::uniform(stream) * spec.cluster_spread;
    centroid.iter().zip(dir).map(|(c, d)| c + r * d).collect()
}

/// Orthonormal basis of the centroid span (classes live in this subspace).
fn span_basis(centroids: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for c in centroids {
        let mut v = c.clone();
        for b in &basis {
            let along: f64 = v.iter().zip(b).map(|(a, x)| a * x).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= along * bi;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            for x in v.iter_mut() {
                *x /= norm;
            }
            basis.push(v);
        }
    }
    basis
}

fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let along: f64 = v.iter().zip(b).map(|(a, x)| a * x).sum();
        for (vi, bi) in v.iter_mut().zip(b) {
            *vi -= along * bi;
        }
    }
}

/// Edge patient mean: `edge_offset` from the centroid along a direction
/// that replaces the class signature. The direction mixes three parts: the
/// inward unit vector (alignment drawn from `EDGE_ANTI_ALIGNMENT`,
/// cancelling the typical presentation), a faint pull toward a rival
/// class's centroid (`EDGE_RIVAL_SHARE`), and a random direction orthogonal
/// to the whole centroid span (idiosyncratic features no class uses — the
/// patient's private structure, disjoint from what the population is
/// classified by).
fn edge_mean(
    spec: &SynthSpec,
    class: usize,
    centroids: &[Vec<f64>],
    span: &[Vec<f64>],
    stream: &mut rand_chacha::ChaCha8Rng,
) -> Vec<f64> {
    let centroid = &centroids[class];
    let norm = centroid.iter().map(|c| c * c).sum::<f64>().sqrt();
    let inward: Vec<f64> = centroid.iter().map(|c| -c / norm).collect();
    let rival_class = {
        let r = (rng::uniform(stream) * (centroids.len() - 1) as f64) as usize;
        if r >= class {
            r + 1
        } else {
            r
        }
    };
    let rival = &centroids[rival_class];
    let rival_norm = rival.iter().map(|c| c * c).sum::<f64>().sqrt();
    let ortho = loop {
        let mut v = rng::unit_vector(stream, spec.input_dim);
        project_out(&mut v, span);
        let pnorm = v.iter().map(|p| p * p).sum::<f64>().sqrt();
        if pnorm > 1e-9 {
            for p in v.iter_mut() {
                *p /= pnorm;
            }
            break v;
        }
    };
    let (lo, hi) = EDGE_ANTI_ALIGNMENT;
    let alignment = lo + (hi - lo) * rng::uniform(stream);
    let tangent = (1.0 - alignment * alignment - EDGE_RIVAL_SHARE * EDGE_RIVAL_SHARE).sqrt();
    (0..spec.input_dim)
        .map(|i| {
            let dir = alignment * inward[i]
                + EDGE_RIVAL_SHARE * rival[i] / rival_norm
                + tangent * ortho[i];
            centroid[i] + spec.edge_offset * dir
        })
        .collect()
}

fn draw_samples(
    spec: &SynthSpec,
    id: &PatientId,
    class: usize,
    mean: &[f64],
    stream: &mut rand_chacha::ChaCha8Rng,
) -> Vec<Sample> {
    (0..spec.samples_per_patient)
        .map(|_| {
            let features = mean
                .iter()
                .map(|m| m + spec.sample_spread * rng::standard_normal(stream))
                .collect();
            Sample {
                features,
                label: class,
                patient_id: id.clone(),
            }
        })
        .collect()
}

/// Generate a dataset plus its ground-truth manifest. Deterministic for a
/// fixed spec (seed included).
pub fn generate(spec: &SynthSpec) -> Result<(PatientDataset, GroundTruthManifest)> {
    spec.validate()?;
    let centroids = draw_centroids(spec)?;
    let span = span_basis(&centroids);
    let n_train = spec.n_train_patients();
    let n_train_edge = spec.edge_count(n_train);
    // Edge slots are dealt round-robin over classes; within a class block
    // the edge patients come first.
    let mut edges_per_class = vec![0usize; spec.num_classes];
    for k in 0..n_train_edge {
        edges_per_class[k % spec.num_classes] += 1;
    }

    let mut train = BTreeMap::new();
    let mut records = BTreeMap::new();

    for idx in 0..n_train {
        let class = idx / spec.patients_per_class_train;
        let within = idx % spec.patients_per_class_train;
        let is_edge = within < edges_per_class[class];
        let id = PatientId::new(format!("p{idx:03}"));
        let mut stream = rng::stream(rng::mix_u64(rng::mix_str(spec.seed, "train-patient"), idx as u64));
        let mean = if is_edge {
            edge_mean(spec, class, &centroids, &span, &mut stream)
        } else {
            cluster_mean(spec, &centroids[class], &mut stream)
        };
        let samples = draw_samples(spec, &id, class, &mean, &mut stream);
        records.insert(
            id.clone(),
            PatientRecord {
                hypothesis: if is_edge {
                    Hypothesis::Edge
                } else {
                    Hypothesis::Cluster
                },
                split: Split::Train,
                class,
            },
        );
        train.insert(id, samples);
    }

    // Test patients: cluster patients, classes dealt round-robin so the
    // split stays balanced.
    let mut test = BTreeMap::new();
    for idx in 0..spec.patients_test {
        let class = idx % spec.num_classes;
        let id = PatientId::new(format!("t{idx:03}"));
        let mut stream = rng::stream(rng::mix_u64(rng::mix_str(spec.seed, "test-patient"), idx as u64));
        let mean = cluster_mean(spec, &centroids[class], &mut stream);
        let samples = draw_samples(spec, &id, class, &mean, &mut stream);
        records.insert(
            id.clone(),
            PatientRecord {
                hypothesis: Hypothesis::Cluster,
                split: Split::Test,
                class,
            },
        );
        test.insert(id, samples);
    }

    let dataset = PatientDataset::new(train, test, spec.num_classes, spec.input_dim)?;
    let manifest = GroundTruthManifest {
        schema_version: crate::report::SCHEMA_VERSION,
        spec: spec.clone(),
        patients: records,
    };
    Ok((dataset, manifest))
}
