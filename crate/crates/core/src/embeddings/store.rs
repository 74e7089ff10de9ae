//! File-backed embedding store.
//!
//! A store directory holds `manifest.json` (format version, dimension and
//! the ordered segment ids) and `vectors.f32`, the rows as little-endian
//! 32-bit floats in row-major order, one row per id.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::RepresentationMatrix;
use crate::error::{Error, Result};

const FORMAT_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";
const BLOB: &str = "vectors.f32";

#[derive(Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    dim: usize,
    dtype: String,
    ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    ids: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f32>,
}

#[derive(Deserialize)]
struct ImportRecord {
    id: String,
    vector: Vec<f64>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Self {
        EmbeddingStore {
            dim,
            ids: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Inserts or replaces the vector for `id`.
    pub fn insert(&mut self, id: &str, vector: &[f64]) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "embedding vector",
                expected: self.dim,
                actual: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding vector"));
        }
        let row: Vec<f32> = vector.iter().map(|&v| v as f32).collect();
        match self.index.get(id) {
            Some(&i) => self.data[i * self.dim..(i + 1) * self.dim].copy_from_slice(&row),
            None => {
                self.index.insert(id.to_string(), self.ids.len());
                self.ids.push(id.to_string());
                self.data.extend_from_slice(&row);
            }
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.index
            .get(id)
            .map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    /// Stored rows for `ids`, in the given order.
    pub fn embed(&self, ids: &[&str]) -> Result<RepresentationMatrix> {
        let mut out = Array2::zeros((ids.len(), self.dim));
        for (r, id) in ids.iter().enumerate() {
            let row = self
                .get(id)
                .ok_or_else(|| Error::MissingEmbedding(id.to_string()))?;
            for (c, &v) in row.iter().enumerate() {
                out[[r, c]] = f64::from(v);
            }
        }
        Ok(out)
    }

    /// Reads line-delimited JSON records `{"id": ..., "vector": [...]}`.
    /// The dimension is taken from the first record.
    pub fn import_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        let mut store: Option<EmbeddingStore> = None;
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<jsonl>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ImportRecord = serde_json::from_str(&line).map_err(|e| Error::MalformedRow {
                row: i + 1,
                message: e.to_string(),
            })?;
            let s = store.get_or_insert_with(|| EmbeddingStore::new(rec.vector.len()));
            s.insert(&rec.id, &rec.vector).map_err(|e| Error::MalformedRow {
                row: i + 1,
                message: e.to_string(),
            })?;
        }
        store.ok_or_else(|| Error::Store("no records to import".into()))
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            dim: self.dim,
            dtype: "f32le".into(),
            ids: self.ids.clone(),
        };
        let path = dir.join(MANIFEST);
        std::fs::write(&path, serde_json::to_vec_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
        let bytes: Vec<u8> = self.data.iter().flat_map(|v| v.to_le_bytes()).collect();
        let path = dir.join(BLOB);
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join(MANIFEST);
        let raw = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_slice(&raw)?;
        if manifest.format_version != FORMAT_VERSION || manifest.dtype != "f32le" {
            return Err(Error::Store(format!(
                "unsupported format {} / {}",
                manifest.format_version, manifest.dtype
            )));
        }
        let path = dir.join(BLOB);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let expected = manifest.ids.len() * manifest.dim * 4;
        if bytes.len() != expected {
            return Err(Error::DimensionMismatch {
                context: "embedding blob bytes",
                expected,
                actual: bytes.len(),
            });
        }
        let data: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let index = manifest
            .ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        Ok(EmbeddingStore {
            dim: manifest.dim,
            ids: manifest.ids,
            index,
            data,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_in_requested_order() {
        let mut s = EmbeddingStore::new(2);
        s.insert("s0", &[1.0, 0.0]).unwrap();
        s.insert("s1", &[0.0, 1.0]).unwrap();
        let m = s.embed(&["s1", "s0"]).unwrap();
        assert_eq!(m, ndarray::array![[0.0, 1.0], [1.0, 0.0]]);
        let before = s.clone();
        let err = s.embed(&["s2"]).unwrap_err();
        assert_eq!(err.to_string(), "missing embedding s2");
        assert_eq!(s, before);
    }

    #[test]
    fn shape_follows_dimension() {
        let mut s = EmbeddingStore::new(768);
        s.insert("a", &vec![0.5; 768]).unwrap();
        assert_eq!(s.embed(&["a", "a"]).unwrap().dim(), (2, 768));
        assert!(s.insert("b", &[1.0]).is_err());
    }

    #[test]
    fn import_save_load() {
        let jsonl = "{\"id\":\"x#0\",\"vector\":[0.25,-1.5,3]}\n\n{\"id\":\"x#1\",\"vector\":[1,2,3]}\n";
        let s = EmbeddingStore::import_jsonl(jsonl.as_bytes()).unwrap();
        assert_eq!((s.dim(), s.len()), (3, 2));
        let dir = tempfile::tempdir().unwrap();
        s.save(dir.path()).unwrap();
        let blob = std::fs::read(dir.path().join(BLOB)).unwrap();
        assert_eq!(&blob[..4], &0.25f32.to_le_bytes());
        let loaded = EmbeddingStore::load(dir.path()).unwrap();
        assert_eq!(loaded, s);
        assert_eq!(loaded.embed(&["x#0"]).unwrap().row(0).to_vec(), vec![0.25, -1.5, 3.0]);
    }

    #[test]
    fn import_rejects_ragged_rows() {
        let jsonl = "{\"id\":\"a\",\"vector\":[1,2]}\n{\"id\":\"b\",\"vector\":[1]}\n";
        match EmbeddingStore::import_jsonl(jsonl.as_bytes()) {
            Err(Error::MalformedRow { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
