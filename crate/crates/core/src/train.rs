//! Seeded, bitwise-deterministic training with Adam.
//!
//! Sample order within an epoch comes from a permutation drawn from a
//! stream keyed by `(seed, epoch)`, so a run is reproducible regardless of
//! how the dataset was assembled or how many other runs happen in parallel.

use serde::{Deserialize, Serialize};

use crate::data::DatasetView;
use crate::error::{Error, Result};
use crate::model::{loss_and_grad, WeightVector};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.0001,
            epochs: 13,
            adam_beta1: 0.5,
            adam_beta2: 0.999,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning_rate must be > 0".into()));
        }
        for (name, beta) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::InvalidConfig(format!("{name} must be in [0, 1)")));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

const ADAM_EPS: f64 = 1e-8;

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: usize,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    fn update(&mut self, cfg: &TrainConfig, weights: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let b1 = cfg.adam_beta1;
        let b2 = cfg.adam_beta2;
        let bias1 = 1.0 - b1.powi(self.step as i32);
        let bias2 = 1.0 - b2.powi(self.step as i32);
        for i in 0..weights.len() {
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * grad[i];
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bias1;
            let v_hat = self.v[i] / bias2;
            weights[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
}

/// Train from `init` on the samples of `view`. `epochs == 0` returns the
/// initial weights unchanged. Divergence (non-finite loss or weights) is an
/// explicit error, never a silent result.
pub fn train(view: &DatasetView<'_>, cfg: &TrainConfig, init: &WeightVector) -> Result<WeightVector> {
    cfg.validate()?;
    if view.is_empty() {
        return Err(Error::EmptyView);
    }
    init.check_finite("initial weights")?;
    let mut weights = init.clone();
    if cfg.epochs == 0 {
        return Ok(weights);
    }

    let samples: Vec<_> = view.samples().collect();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut adam = Adam::new(weights.len());
    let shuffle_seed = rng::mix_str(cfg.seed, "shuffle");

    for epoch in 0..cfg.epochs {
        let mut stream = rng::stream(rng::mix_u64(shuffle_seed, epoch as u64));
        rng::shuffle(&mut stream, &mut order);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&[f64], usize)> = chunk
                .iter()
                .map(|&i| (samples[i].features.as_slice(), samples[i].label))
                .collect();
            let (loss, grad) = loss_and_grad(&weights, &batch)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            adam.update(cfg, &mut weights.values, &grad);
        }
        if weights.values.iter().any(|w| !w.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
    }
    Ok(weights)
}
