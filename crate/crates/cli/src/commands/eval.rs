use std::path::PathBuf;

use unlearn_core::{evaluate, load_checkpoint, load_dataset, PatientId, Result};

#[derive(Debug, clap::Args)]
pub struct EvalArgs {
    /// Dataset file (jsonl).
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint to evaluate.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Splits to print: train, test, or both by default.
    #[arg(long)]
    pub split: Option<String>,
    /// Also split out one patient's forget/retain errors.
    #[arg(long)]
    pub forget: Option<String>,
}

pub fn run(args: EvalArgs) -> Result<bool> {
    let dataset = load_dataset(&args.data)?;
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let which = args.split.as_deref().unwrap_or("all");
    if which == "train" || which == "all" {
        let r = evaluate(&ckpt.weights, &dataset.train_view())?;
        println!("train {:.6} {}", r.error, r.n_samples);
    }
    if (which == "test" || which == "all") && !dataset.test_patients().is_empty() {
        let r = evaluate(&ckpt.weights, &dataset.test_view())?;
        println!("test {:.6} {}", r.error, r.n_samples);
    }
    if let Some(patient) = &args.forget {
        let split = dataset.make_forget_split(&PatientId::new(patient.clone()))?;
        let df = evaluate(&ckpt.weights, &split.d_f)?;
        let dr = evaluate(&ckpt.weights, &split.d_r)?;
        println!("forget[{patient}] {:.6} {}", df.error, df.n_samples);
        println!("retain[{patient}] {:.6} {}", dr.error, dr.n_samples);
    }
    Ok(false)
}
