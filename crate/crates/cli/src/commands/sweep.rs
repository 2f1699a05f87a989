use std::path::PathBuf;

use unlearn_core::{
    leave_one_out_sweep, load_dataset, report, Result, SweepOptions,
};

use crate::config::FileConfig;

use super::{ArchArgs, CommonArgs, TrainArgs_};

#[derive(Debug, clap::Args)]
pub struct SweepArgs {
    /// Dataset file (jsonl).
    #[arg(long)]
    pub data: PathBuf,
    /// Sweep report output path (json).
    #[arg(long)]
    pub out: PathBuf,
    /// Edge/cluster threshold on the golden error.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Worker threads for the retrains.
    #[arg(long)]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub arch: ArchArgs,
    #[command(flatten)]
    pub train: TrainArgs_,
    #[command(flatten)]
    pub common: CommonArgs,
}

pub fn run(args: SweepArgs) -> Result<bool> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let dataset = load_dataset(&args.data)?;
    let arch = args
        .arch
        .resolve(file.arch.as_ref(), dataset.input_dim, dataset.num_classes)?;
    let cfg = args.train.resolve(file.train.as_ref());
    let sweep_file = file.sweep.unwrap_or_default();
    let opts = SweepOptions {
        threshold: args
            .threshold
            .or(sweep_file.threshold)
            .unwrap_or(unlearn_core::oracle::DEFAULT_EDGE_THRESHOLD),
        workers: args.workers.or(sweep_file.workers).unwrap_or(1),
        ..SweepOptions::default()
    };
    let outcome = leave_one_out_sweep(&dataset, &arch, &cfg, &opts)?;
    let config_echo = serde_json::json!({
        "data": args.data.display().to_string(),
        "arch": { "input_dim": arch.input_dim, "hidden_sizes": arch.hidden_sizes,
                  "num_classes": arch.num_classes, "activation": arch.activation },
        "train": cfg,
        "threshold": opts.threshold,
    });
    let partial = !outcome.failures.is_empty();
    let out = report::SweepReportFile {
        schema_version: report::SCHEMA_VERSION,
        kind: report::SWEEP_KIND.to_string(),
        tool_version: report::tool_version(),
        config: config_echo,
        records: outcome.records,
        failures: outcome.failures,
        histogram: outcome.histogram,
        edge_proportion: outcome.edge_proportion,
        threshold: outcome.threshold,
        epochs: outcome.epochs,
    };
    report::save_json(&args.out, &out)?;
    println!(
        "sweep: {} retrains, {} failures, edge proportion {:.3} -> {}",
        out.records.len(),
        out.failures.len(),
        out.edge_proportion,
        args.out.display()
    );
    Ok(partial)
}
