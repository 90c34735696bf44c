//! Self-describing JSON container of named arrays.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::Array2;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Architecture, Module};
use crate::error::{Error, Result};

pub const FORMAT: &str = "leoroute-checkpoint/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedArray {
    pub name: String,
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

/// Named tensors of one module.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParameterBlock {
    pub arrays: Vec<NamedArray>,
}

impl ParameterBlock {
    pub fn from_module<M: Module>(m: &M) -> Self {
        let arrays = m
            .names()
            .into_iter()
            .zip(m.tensors())
            .map(|(name, t)| NamedArray { name, shape: [t.nrows(), t.ncols()], data: t.iter().copied().collect() })
            .collect();
        Self { arrays }
    }

    /// Copies values into `m`; names and shapes must match exactly.
    pub fn load_into<M: Module>(&self, m: &mut M) -> Result<()> {
        let names = m.names();
        if names.len() != self.arrays.len() {
            return Err(Error::Shape(format!("{} tensors stored, {} expected", self.arrays.len(), names.len())));
        }
        for ((a, name), t) in self.arrays.iter().zip(names).zip(m.tensors_mut()) {
            if a.name != name || a.shape != [t.nrows(), t.ncols()] || a.data.len() != t.len() {
                return Err(Error::Shape(format!("tensor {} does not match {name} {:?}", a.name, t.shape())));
            }
            t.assign(&Array2::from_shape_vec((a.shape[0], a.shape[1]), a.data.clone()).map_err(|e| Error::Shape(e.to_string()))?);
        }
        Ok(())
    }
}

/// Enough to restore a `ChaCha8Rng` mid-stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: Vec<u8>,
    pub stream: u64,
    /// Word position as a decimal string (it is a u128).
    pub word_pos: String,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        Self { seed: rng.get_seed().to_vec(), stream: rng.get_stream(), word_pos: rng.get_word_pos().to_string() }
    }

    pub fn restore(&self) -> Result<ChaCha8Rng> {
        use rand::SeedableRng;
        let seed: [u8; 32] = self.seed.as_slice().try_into().map_err(|_| Error::Parse("rng seed must be 32 bytes".into()))?;
        let pos: u128 = self.word_pos.parse().map_err(|_| Error::Parse("bad rng word position".into()))?;
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(pos);
        Ok(rng)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub architecture: Architecture,
    pub blocks: BTreeMap<String, ParameterBlock>,
    pub rng: Option<RngState>,
    /// Free-form metadata (algorithm, scenario, multipliers, ...).
    pub meta: serde_json::Value,
}

impl Checkpoint {
    pub fn new(architecture: Architecture) -> Self {
        Self {
            format: FORMAT.into(),
            architecture,
            blocks: BTreeMap::new(),
            rng: None,
            meta: serde_json::Value::Null,
        }
    }

    pub fn insert<M: Module>(&mut self, name: &str, m: &M) {
        self.blocks.insert(name.into(), ParameterBlock::from_module(m));
    }

    pub fn load<M: Module>(&self, name: &str, m: &mut M) -> Result<()> {
        self.blocks
            .get(name)
            .ok_or_else(|| Error::Parse(format!("checkpoint has no block {name}")))?
            .load_into(m)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        if c.format != FORMAT {
            return Err(Error::Parse(format!("unsupported checkpoint format {}", c.format)));
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
