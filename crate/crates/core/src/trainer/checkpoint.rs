//! Single-file checkpoints: an 8-byte magic, the manifest length as a
//! little-endian u64, a JSON manifest, then every tensor as little-endian
//! f32 in row-major order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use crate::aiem::{ModelConfig, Standardizer, TraitModel};
use crate::embeddings::Vocabulary;
use crate::error::{Error, Result};
use crate::seed::rng_for;

const MAGIC: &[u8; 8] = b"ADFCKPT1";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    dtype: String,
    trait_name: String,
    fold: Option<usize>,
    config: TrainConfig,
    model: ModelConfig,
    standardizer: Standardizer,
    vocabulary: Option<Vocabulary>,
    tensors: Vec<TensorEntry>,
}

/// A trained trait model with everything needed to run it again.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub trait_name: String,
    pub fold: Option<usize>,
    pub config: TrainConfig,
    pub model: TraitModel,
    pub vocabulary: Option<Vocabulary>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let tensors = self.model.params.tensors();
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            dtype: "f32le".into(),
            trait_name: self.trait_name.clone(),
            fold: self.fold,
            config: self.config.clone(),
            model: self.model.config.clone(),
            standardizer: self.model.standardizer.clone(),
            vocabulary: self.vocabulary.clone(),
            tensors: tensors
                .iter()
                .map(|t| TensorEntry {
                    name: t.name.to_string(),
                    shape: t.shape.clone(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&manifest)?;
        let mut out = Vec::with_capacity(16 + json.len() + 4 * self.model.params.num_scalars());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for t in &tensors {
            for &v in t.data {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let body = bytes.get(16..16 + len).ok_or_else(|| bad("truncated manifest"))?;
        let manifest: Manifest = serde_json::from_slice(body)?;
        if manifest.format_version != FORMAT_VERSION || manifest.dtype != "f32le" {
            return Err(bad("unsupported checkpoint version"));
        }
        manifest.model.validate()?;
        // Shapes come from the model config; the init values are overwritten.
        let mut model = TraitModel::init(manifest.model.clone(), &mut rng_for(0, &[]))?;
        model.standardizer = manifest.standardizer;
        let mut blob = &bytes[16 + len..];
        let slots = model.params.tensors_mut();
        if slots.len() != manifest.tensors.len() {
            return Err(bad("tensor count does not match the model"));
        }
        for ((name, data), entry) in slots.into_iter().zip(&manifest.tensors) {
            if name != entry.name || entry.shape.iter().product::<usize>() != data.len() {
                return Err(Error::Checkpoint(format!("tensor {} does not match the model", entry.name)));
            }
            let need = data.len() * 4;
            if blob.len() < need {
                return Err(bad("truncated tensor data"));
            }
            for (d, c) in data.iter_mut().zip(blob[..need].chunks_exact(4)) {
                *d = f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
            }
            blob = &blob[need..];
        }
        if !blob.is_empty() {
            return Err(bad("trailing bytes after tensor data"));
        }
        Ok(Checkpoint {
            trait_name: manifest.trait_name,
            fold: manifest.fold,
            config: manifest.config,
            model,
            vocabulary: manifest.vocabulary,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
