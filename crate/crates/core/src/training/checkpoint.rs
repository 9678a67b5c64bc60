//! Binary checkpoint layout (all integers little-endian):
//!
//! ```text
//! "PCUP"  u32 version
//! u32 len, config as key = value text
//! u64 step
//! [u8; 32] rng seed, u128 rng word position
//! u32 count, then per parameter:
//!     u32 len, name; u32 ndim, u64 dims[ndim]; f32 values[product(dims)]
//! ```

use std::path::Path;

use super::TrainConfig;
use crate::autodiff::{ParamStore, Tensor};
use crate::error::{Error, Result};
use crate::model::{param_specs, UpsamplerConfig};

const MAGIC: &[u8; 4] = b"PCUP";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Trained weights with everything needed to rebuild the run that made them.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub step: u64,
    pub rng_seed: [u8; 32],
    pub rng_word_pos: u128,
    pub params: ParamStore,
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize, what: &'static str) -> Result<&'a [u8]> {
        if self.bytes.len() < len {
            return Err(Error::Truncated(what));
        }
        let (head, rest) = self.bytes.split_at(len);
        self.bytes = rest;
        Ok(head)
    }

    fn array<const N: usize>(&mut self, what: &'static str) -> Result<[u8; N]> {
        Ok(self.take(N, what)?.try_into().expect("length checked"))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array(what)?))
    }

    fn u64(&mut self, what: &'static str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array(what)?))
    }

    fn string(&mut self, what: &'static str) -> Result<String> {
        let len = self.u32(what)? as usize;
        String::from_utf8(self.take(len, what)?.to_vec())
            .map_err(|_| Error::invalid(format!("checkpoint {what} is not UTF-8")))
    }
}

impl Checkpoint {
    /// The weights, after checking every declared parameter of `model`
    /// exists with the expected dimensions.
    pub fn params_for(&self, model: &UpsamplerConfig) -> Result<&ParamStore> {
        check_params(&self.params, model)?;
        Ok(&self.params)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let config = self.config.to_kv();
        out.extend_from_slice(&(config.len() as u32).to_le_bytes());
        out.extend_from_slice(config.as_bytes());
        out.extend_from_slice(&self.step.to_le_bytes());
        out.extend_from_slice(&self.rng_seed);
        out.extend_from_slice(&self.rng_word_pos.to_le_bytes());
        out.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for (name, tensor) in self.params.iter() {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(tensor.shape().len() as u32).to_le_bytes());
            for &d in tensor.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &v in tensor.data() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes };
        let magic = r.take(4, "header")?;
        if magic != MAGIC {
            return Err(Error::VersionMismatch {
                expected: format!("PCUP v{CHECKPOINT_VERSION}"),
                found: format!("header {:?}", String::from_utf8_lossy(magic)),
            });
        }
        let version = r.u32("header")?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::VersionMismatch {
                expected: format!("PCUP v{CHECKPOINT_VERSION}"),
                found: format!("PCUP v{version}"),
            });
        }
        let config = TrainConfig::from_kv(&r.string("config")?)?;
        let step = r.u64("step")?;
        let rng_seed = r.array("rng state")?;
        let rng_word_pos = u128::from_le_bytes(r.array("rng state")?);
        let count = r.u32("parameter count")?;
        let mut params = ParamStore::new();
        for _ in 0..count {
            let name = r.string("parameter name")?;
            let ndim = r.u32("parameter dims")? as usize;
            let shape = (0..ndim)
                .map(|_| r.u64("parameter dims").map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let numel = shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
            let numel = numel.ok_or(Error::Truncated("parameter values"))?;
            let raw = r.take(numel.checked_mul(4).ok_or(Error::Truncated("parameter values"))?, "parameter values")?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")) as f64)
                .collect();
            params.insert(name, Tensor::new(shape, data)?);
        }
        if !r.bytes.is_empty() {
            return Err(Error::invalid("trailing bytes after checkpoint"));
        }
        check_params(&params, &config.model)?;
        Ok(Self { config, step, rng_seed, rng_word_pos, params })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn check_params(params: &ParamStore, model: &UpsamplerConfig) -> Result<()> {
    for spec in param_specs(model) {
        match params.get(&spec.name) {
            Some(t) if t.shape() == spec.shape.as_slice() => {}
            found => {
                return Err(Error::DimMismatch {
                    name: spec.name,
                    expected: spec.shape,
                    found: found.map(|t| t.shape().to_vec()).unwrap_or_default(),
                })
            }
        }
    }
    Ok(())
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    checkpoint.save(path)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    Checkpoint::load(path)
}
