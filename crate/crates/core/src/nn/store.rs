//! Bit-exact checkpoint serialization: a one-line JSON header describing
//! named tensors plus a raw little-endian f32 blob.

use ndarray::{ArrayD, IxDyn};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

const STORE_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    meta: Value,
    tensors: Vec<TensorInfo>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorInfo {
    name: String,
    shape: Vec<usize>,
}

/// An ordered collection of named f32 tensors plus a JSON metadata blob.
#[derive(Debug, Default)]
pub struct TensorStore {
    pub meta: Value,
    entries: Vec<(String, ArrayD<f32>)>,
}

impl TensorStore {
    pub fn new(meta: Value) -> Self {
        Self { meta, entries: Vec::new() }
    }

    pub fn insert(&mut self, name: &str, tensor: ArrayD<f32>) {
        debug_assert!(
            !self.entries.iter().any(|(n, _)| n == name),
            "duplicate tensor name {name}"
        );
        self.entries.push((name.to_string(), tensor));
    }

    pub fn get(&self, name: &str) -> Result<&ArrayD<f32>> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let header = Header {
            version: STORE_VERSION,
            meta: self.meta.clone(),
            tensors: self
                .entries
                .iter()
                .map(|(name, t)| TensorInfo { name: name.clone(), shape: t.shape().to_vec() })
                .collect(),
        };
        let mut out = Vec::new();
        serde_json::to_writer(&mut out, &header)?;
        out.push(b'\n');
        for (_, t) in &self.entries {
            for v in t.iter() {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Checkpoint("missing header line".into()))?;
        let header: Header = serde_json::from_slice(&bytes[..nl])?;
        if header.version != STORE_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {}",
                header.version
            )));
        }
        let mut blob = &bytes[nl + 1..];
        let mut entries = Vec::with_capacity(header.tensors.len());
        for info in header.tensors {
            let n: usize = info.shape.iter().product();
            if blob.len() < n * 4 {
                return Err(Error::Checkpoint(format!(
                    "tensor {} truncated: need {} floats",
                    info.name, n
                )));
            }
            let mut data = Vec::with_capacity(n);
            for chunk in blob[..n * 4].chunks_exact(4) {
                data.push(f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]));
            }
            blob = &blob[n * 4..];
            let tensor = ArrayD::from_shape_vec(IxDyn(&info.shape), data)
                .map_err(|e| Error::Checkpoint(format!("tensor {}: {e}", info.name)))?;
            entries.push((info.name, tensor));
        }
        if !blob.is_empty() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", blob.len())));
        }
        Ok(Self { meta: header.meta, entries })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.bin");
        let mut store = TensorStore::new(serde_json::json!({"kind": "test", "epoch": 3}));
        let a = ArrayD::from_shape_vec(
            IxDyn(&[2, 3]),
            vec![1.0f32, -2.5, 3.25e-8, f32::MIN_POSITIVE, 0.1, 1e30],
        )
        .unwrap();
        let b = ArrayD::from_shape_vec(IxDyn(&[4]), vec![0.0f32, -0.0, 7.7, -1.1]).unwrap();
        store.insert("layer.w", a.clone());
        store.insert("layer.b", b.clone());
        store.save(&path).unwrap();

        let back = TensorStore::load(&path).unwrap();
        assert_eq!(back.meta["kind"], "test");
        assert_eq!(back.meta["epoch"], 3);
        // Bit-exact, including signed zero.
        for (x, y) in back.get("layer.w").unwrap().iter().zip(a.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        for (x, y) in back.get("layer.b").unwrap().iter().zip(b.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert!(back.get("nope").is_err());
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.bin");
        let mut store = TensorStore::new(Value::Null);
        store.insert("t", ArrayD::from_elem(IxDyn(&[8]), 1.0f32));
        store.save(&path).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(TensorStore::load(&path), Err(Error::Checkpoint(_))));
    }
}
