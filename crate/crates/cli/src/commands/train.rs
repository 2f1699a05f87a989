use std::path::PathBuf;

use unlearn_core::{
    evaluate, init_weights, load_dataset, save_checkpoint, train, Result,
};

use crate::config::FileConfig;

use super::{ArchArgs, CommonArgs, TrainArgs_};

#[derive(Debug, clap::Args)]
pub struct TrainArgs {
    /// Dataset file (jsonl).
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint output path.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub arch: ArchArgs,
    #[command(flatten)]
    pub train: TrainArgs_,
    #[command(flatten)]
    pub common: CommonArgs,
}

pub fn run(args: TrainArgs) -> Result<bool> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let dataset = load_dataset(&args.data)?;
    let arch = args
        .arch
        .resolve(file.arch.as_ref(), dataset.input_dim, dataset.num_classes)?;
    let cfg = args.train.resolve(file.train.as_ref());
    let init = init_weights(&arch, cfg.seed)?;
    let weights = train(&dataset.train_view(), &cfg, &init)?;
    save_checkpoint(&args.out, &weights, &cfg)?;
    let train_err = evaluate(&weights, &dataset.train_view())?.error;
    println!("train {:.6} {}", train_err, dataset.n_train_samples());
    if !dataset.test_patients().is_empty() {
        let test = evaluate(&weights, &dataset.test_view())?;
        println!("test {:.6} {}", test.error, test.n_samples);
    }
    println!("checkpoint {}", args.out.display());
    Ok(false)
}
