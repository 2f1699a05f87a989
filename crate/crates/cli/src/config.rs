//! Optional config file: defaults for the command-line flags.
//!
//! Every field is optional; a flag given on the command line always wins
//! over the file, and built-in defaults fill whatever is left. The resolved
//! configuration is echoed verbatim into every report this tool writes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use unlearn_core::{Activation, Result, SynthSpec, TrainConfig};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub synth: Option<SynthSpec>,
    #[serde(default)]
    pub arch: Option<ArchConfig>,
    #[serde(default)]
    pub train: Option<TrainConfig>,
    #[serde(default)]
    pub forget: Option<ForgetDefaults>,
    #[serde(default)]
    pub sweep: Option<SweepDefaults>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArchConfig {
    pub hidden_sizes: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            hidden_sizes: vec![128],
            activation: Activation::Relu,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForgetDefaults {
    #[serde(default)]
    pub methods: Option<Vec<String>>,
    #[serde(default)]
    pub levels: Option<Vec<String>>,
    #[serde(default)]
    pub patients: Option<Vec<String>>,
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default)]
    pub eval_draws: Option<usize>,
    #[serde(default)]
    pub topk_fraction: Option<f64>,
    #[serde(default)]
    pub fim_floor: Option<f64>,
    #[serde(default)]
    pub base_seed: Option<u64>,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub relative_from_high: Option<bool>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepDefaults {
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub workers: Option<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => unlearn_core::load_json(p),
            None => Ok(Self::default()),
        }
    }
}
