//! Shared setup for the pipeline benchmarks.

use unlearn_core::{
    generate, init_weights, train, ModelArch, PatientDataset, SynthSpec, TrainConfig,
    WeightVector,
};

pub fn bench_spec() -> SynthSpec {
    SynthSpec {
        edge_fraction: 0.3,
        seed: 17,
        ..SynthSpec::default()
    }
}

pub fn bench_arch() -> ModelArch {
    let spec = bench_spec();
    ModelArch::new(spec.input_dim, vec![64], spec.num_classes).expect("arch")
}

pub fn bench_config() -> TrainConfig {
    TrainConfig {
        learning_rate: 0.002,
        epochs: 13,
        seed: 4,
        ..TrainConfig::default()
    }
}

/// Dataset plus a trained model at the benchmark scale.
pub fn trained_model() -> (PatientDataset, WeightVector) {
    let (dataset, _) = generate(&bench_spec()).expect("generate");
    let cfg = bench_config();
    let init = init_weights(&bench_arch(), cfg.seed).expect("init");
    let model = train(&dataset.train_view(), &cfg, &init).expect("train");
    (dataset, model)
}
