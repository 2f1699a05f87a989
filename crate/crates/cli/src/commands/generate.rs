use std::path::PathBuf;

use unlearn_core::{generate, save_dataset, save_manifest, Result, SynthSpec};

use crate::config::FileConfig;

use super::CommonArgs;

#[derive(Debug, clap::Args)]
pub struct GenerateArgs {
    /// Output directory; receives dataset.jsonl and manifest.json.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub num_classes: Option<usize>,
    #[arg(long)]
    pub input_dim: Option<usize>,
    /// Training patients per class.
    #[arg(long)]
    pub patients_per_class: Option<usize>,
    /// Total test patients.
    #[arg(long)]
    pub patients_test: Option<usize>,
    #[arg(long)]
    pub samples_per_patient: Option<usize>,
    /// Radius of patient means around their class centroid.
    #[arg(long)]
    pub cluster_spread: Option<f64>,
    /// Spread of a patient's samples around the patient mean.
    #[arg(long)]
    pub sample_spread: Option<f64>,
    /// Distance of an edge patient's mean from its class centroid.
    #[arg(long)]
    pub edge_offset: Option<f64>,
    /// Fraction of training patients drawn as edge cases.
    #[arg(long)]
    pub edge_fraction: Option<f64>,
    #[command(flatten)]
    pub common: CommonArgs,
}

pub fn run(args: GenerateArgs) -> Result<bool> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let base = file.synth.unwrap_or_default();
    let spec = SynthSpec {
        num_classes: args.num_classes.unwrap_or(base.num_classes),
        input_dim: args.input_dim.unwrap_or(base.input_dim),
        patients_per_class_train: args.patients_per_class.unwrap_or(base.patients_per_class_train),
        patients_test: args.patients_test.unwrap_or(base.patients_test),
        samples_per_patient: args.samples_per_patient.unwrap_or(base.samples_per_patient),
        cluster_spread: args.cluster_spread.unwrap_or(base.cluster_spread),
        sample_spread: args.sample_spread.unwrap_or(base.sample_spread),
        edge_offset: args.edge_offset.unwrap_or(base.edge_offset),
        edge_fraction: args.edge_fraction.unwrap_or(base.edge_fraction),
        seed: args.seed.unwrap_or(base.seed),
    };
    let (dataset, manifest) = generate(&spec)?;
    std::fs::create_dir_all(&args.out)?;
    let data_path = args.out.join("dataset.jsonl");
    let manifest_path = args.out.join("manifest.json");
    save_dataset(&dataset, &data_path)?;
    save_manifest(&manifest, &manifest_path)?;
    println!(
        "generated {} train / {} test patients ({} classes) -> {}",
        dataset.train_patients().len(),
        dataset.test_patients().len(),
        dataset.num_classes,
        data_path.display()
    );
    Ok(false)
}
