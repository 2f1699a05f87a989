//! Model checkpoints.
//!
//! Binary container, little-endian: magic `UNCK`, format version, the
//! architecture, the training configuration it was produced with, and the
//! flat weight values at full double precision. Round-trips are bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Activation, ModelArch, WeightVector};
use crate::rng;
use crate::train::TrainConfig;

const MAGIC: &[u8; 4] = b"UNCK";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub weights: WeightVector,
    pub config: TrainConfig,
}

pub fn save_checkpoint(path: &Path, weights: &WeightVector, config: &TrainConfig) -> Result<()> {
    weights.check_finite("checkpoint weights")?;
    let arch = &weights.arch;
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(arch.input_dim as u64).to_le_bytes())?;
    out.write_all(&(arch.hidden_sizes.len() as u32).to_le_bytes())?;
    for &h in &arch.hidden_sizes {
        out.write_all(&(h as u64).to_le_bytes())?;
    }
    out.write_all(&(arch.num_classes as u64).to_le_bytes())?;
    out.write_all(&[match arch.activation {
        Activation::Relu => 0u8,
        Activation::Tanh => 1u8,
    }])?;
    out.write_all(&config.learning_rate.to_le_bytes())?;
    out.write_all(&(config.epochs as u64).to_le_bytes())?;
    out.write_all(&config.adam_beta1.to_le_bytes())?;
    out.write_all(&config.adam_beta2.to_le_bytes())?;
    out.write_all(&(config.batch_size as u64).to_le_bytes())?;
    out.write_all(&config.seed.to_le_bytes())?;
    out.write_all(&(weights.values.len() as u64).to_le_bytes())?;
    for v in &weights.values {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

fn read_exact<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut r = BufReader::new(File::open(path)?);
    let magic: [u8; 4] = read_exact(&mut r)?;
    if &magic != MAGIC {
        return Err(Error::CorruptFile("bad magic bytes".into()));
    }
    let version = u32::from_le_bytes(read_exact(&mut r)?);
    if version != VERSION {
        return Err(Error::FileVersion {
            found: version,
            expected: VERSION,
        });
    }
    let input_dim = u64::from_le_bytes(read_exact(&mut r)?) as usize;
    let n_hidden = u32::from_le_bytes(read_exact(&mut r)?) as usize;
    let mut hidden_sizes = Vec::with_capacity(n_hidden);
    for _ in 0..n_hidden {
        hidden_sizes.push(u64::from_le_bytes(read_exact(&mut r)?) as usize);
    }
    let num_classes = u64::from_le_bytes(read_exact(&mut r)?) as usize;
    let activation = match read_exact::<1>(&mut r)?[0] {
        0 => Activation::Relu,
        1 => Activation::Tanh,
        other => {
            return Err(Error::CorruptFile(format!("unknown activation tag {other}")));
        }
    };
    let arch = ModelArch::new(input_dim, hidden_sizes, num_classes)?.with_activation(activation);
    let config = TrainConfig {
        learning_rate: f64::from_le_bytes(read_exact(&mut r)?),
        epochs: u64::from_le_bytes(read_exact(&mut r)?) as usize,
        adam_beta1: f64::from_le_bytes(read_exact(&mut r)?),
        adam_beta2: f64::from_le_bytes(read_exact(&mut r)?),
        batch_size: u64::from_le_bytes(read_exact(&mut r)?) as usize,
        seed: u64::from_le_bytes(read_exact(&mut r)?),
    };
    let n = u64::from_le_bytes(read_exact(&mut r)?) as usize;
    if n != arch.param_count() {
        return Err(Error::CorruptFile(format!(
            "weight count {n} does not match architecture ({} expected)",
            arch.param_count()
        )));
    }
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        values.push(f64::from_le_bytes(read_exact(&mut r)?));
    }
    let weights = WeightVector { values, arch };
    weights.check_finite("checkpoint weights")?;
    Ok(Checkpoint {
        weights,
        config,
    })
}

/// Content hash of a file, used to tie cached curvature dumps to the exact
/// checkpoint they were computed from.
pub fn file_hash(path: &Path) -> Result<u64> {
    let bytes = std::fs::read(path)?;
    Ok(rng::fnv1a64(&bytes))
}
