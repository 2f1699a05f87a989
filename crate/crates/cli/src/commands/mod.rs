pub mod eval;
pub mod forget;
pub mod generate;
pub mod report;
pub mod sweep;
pub mod train;

use std::path::PathBuf;

use unlearn_core::{Activation, ModelArch, Result};

use crate::config::ArchConfig;

/// Shared flags describing the classifier shape.
#[derive(Debug, Clone, clap::Args)]
pub struct ArchArgs {
    /// Hidden layer sizes, comma separated (e.g. "128" or "64,32").
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    /// Hidden activation.
    #[arg(long, value_parser = parse_activation)]
    pub activation: Option<Activation>,
}

fn parse_activation(s: &str) -> std::result::Result<Activation, String> {
    match s {
        "relu" => Ok(Activation::Relu),
        "tanh" => Ok(Activation::Tanh),
        other => Err(format!("unknown activation {other:?} (relu or tanh)")),
    }
}

impl ArchArgs {
    pub fn resolve(&self, file: Option<&ArchConfig>, input_dim: usize, num_classes: usize) -> Result<ModelArch> {
        let defaults = ArchConfig::default();
        let hidden = self
            .hidden
            .clone()
            .or_else(|| file.map(|a| a.hidden_sizes.clone()))
            .unwrap_or(defaults.hidden_sizes);
        let activation = self
            .activation
            .or_else(|| file.map(|a| a.activation))
            .unwrap_or(defaults.activation);
        Ok(ModelArch::new(input_dim, hidden, num_classes)?.with_activation(activation))
    }
}

/// Shared flags for the training configuration.
#[derive(Debug, Clone, clap::Args)]
pub struct TrainArgs_ {
    /// Learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Training epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Adam first-moment decay.
    #[arg(long)]
    pub beta1: Option<f64>,
    /// Adam second-moment decay.
    #[arg(long)]
    pub beta2: Option<f64>,
    /// Minibatch size.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Training seed (initialization and shuffling).
    #[arg(long)]
    pub seed: Option<u64>,
}

impl TrainArgs_ {
    pub fn resolve(&self, file: Option<&unlearn_core::TrainConfig>) -> unlearn_core::TrainConfig {
        let base = file.cloned().unwrap_or_default();
        unlearn_core::TrainConfig {
            learning_rate: self.lr.unwrap_or(base.learning_rate),
            epochs: self.epochs.unwrap_or(base.epochs),
            adam_beta1: self.beta1.unwrap_or(base.adam_beta1),
            adam_beta2: self.beta2.unwrap_or(base.adam_beta2),
            batch_size: self.batch_size.unwrap_or(base.batch_size),
            seed: self.seed.unwrap_or(base.seed),
        }
    }
}

/// Common file arguments.
#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// Optional config file supplying defaults for the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}
