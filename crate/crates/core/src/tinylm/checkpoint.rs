//! Portable checkpoints.
//!
//! A checkpoint is a directory with two files:
//!
//! - `manifest.json`: format tag, kind, model config, tokenizer vocabulary,
//!   training metadata, the tensor table (name, rows, cols, offset in values)
//!   and the SHA-256 of the blob.
//! - `params.bin`: every tensor in table order, row-major, each value an IEEE
//!   754 `f64` in little-endian byte order. No header, no padding.
//!
//! Loading verifies the digest before decoding any value.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::autograd::{Matrix, Parameters};
use super::model::{ModelConfig, TinyLm};
use super::tokenizer::Tokenizer;
use crate::error::{Error, Result};

pub const FORMAT: &str = "finchat-checkpoint/1";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const BLOB_FILE: &str = "params.bin";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub steps: u64,
    pub stage: String,
    #[serde(default)]
    pub epoch_losses: Vec<f64>,
    /// Mean preference margin per epoch; empty outside preference training.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub epoch_margins: Vec<f64>,
    /// Resolved run configuration of the command that wrote the artifact.
    #[serde(default)]
    pub provenance: serde_json::Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
    offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest<C> {
    format: String,
    kind: String,
    config: C,
    tokenizer: Tokenizer,
    meta: TrainingMeta,
    tensors: Vec<TensorEntry>,
    blob: String,
    blob_sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn encode_blob(params: &Parameters) -> (Vec<u8>, Vec<TensorEntry>) {
    let mut blob = Vec::with_capacity(params.num_scalars() * 8);
    let mut entries = Vec::with_capacity(params.len());
    let mut offset = 0;
    for (name, t) in params.iter() {
        entries.push(TensorEntry { name: name.to_string(), rows: t.nrows(), cols: t.ncols(), offset });
        for v in t.iter() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
        offset += t.len();
    }
    (blob, entries)
}

/// Digest of a parameter set's blob encoding; stable across save/load.
pub fn params_digest(params: &Parameters) -> String {
    sha256_hex(&encode_blob(params).0)
}

/// Writes `params` and the manifest under `dir`, creating it if needed.
pub fn save<C: Serialize>(
    dir: &Path,
    kind: &str,
    config: &C,
    tokenizer: &Tokenizer,
    meta: &TrainingMeta,
    params: &Parameters,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (blob, tensors) = encode_blob(params);
    let manifest = Manifest {
        format: FORMAT.to_string(),
        kind: kind.to_string(),
        config,
        tokenizer: tokenizer.clone(),
        meta: meta.clone(),
        tensors,
        blob: BLOB_FILE.to_string(),
        blob_sha256: sha256_hex(&blob),
    };
    let blob_path = dir.join(BLOB_FILE);
    fs::write(&blob_path, &blob).map_err(|e| Error::io(&blob_path, e))?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&manifest_path, text).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(())
}

/// Reads a checkpoint of the given kind, verifying format, kind and digest.
pub fn load<C: DeserializeOwned>(dir: &Path, kind: &str) -> Result<(C, Tokenizer, TrainingMeta, Parameters)> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: Manifest<C> = serde_json::from_str(&text)?;
    if manifest.format != FORMAT {
        return Err(Error::Checkpoint(format!("unsupported format {:?}", manifest.format)));
    }
    if manifest.kind != kind {
        return Err(Error::Checkpoint(format!("expected a {kind} checkpoint, found {}", manifest.kind)));
    }
    let blob_path = dir.join(&manifest.blob);
    let blob = fs::read(&blob_path).map_err(|e| Error::io(&blob_path, e))?;
    if sha256_hex(&blob) != manifest.blob_sha256 {
        return Err(Error::Checkpoint("parameter blob checksum mismatch".into()));
    }
    let mut params = Parameters::new();
    for e in &manifest.tensors {
        let start = e.offset * 8;
        let end = start + e.rows * e.cols * 8;
        let bytes =
            blob.get(start..end).ok_or_else(|| Error::Checkpoint(format!("tensor {} runs past the blob", e.name)))?;
        let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
        let t = Matrix::from_shape_vec((e.rows, e.cols), values).map_err(|err| Error::Checkpoint(err.to_string()))?;
        params.push(e.name.clone(), t);
    }
    let mut tokenizer = manifest.tokenizer;
    tokenizer.reindex();
    if !tokenizer.reserved_ok() {
        return Err(Error::Checkpoint("tokenizer reserved ids are corrupted".into()));
    }
    Ok((manifest.config, tokenizer, manifest.meta, params))
}

/// A language model with its tokenizer and training metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelCheckpoint {
    pub model: TinyLm,
    pub tokenizer: Tokenizer,
    pub meta: TrainingMeta,
}

impl ModelCheckpoint {
    pub const KIND: &'static str = "tinylm";

    pub fn config(&self) -> &ModelConfig {
        self.model.config()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        save(dir, Self::KIND, self.model.config(), &self.tokenizer, &self.meta, self.model.params())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let (config, tokenizer, meta, params) = load::<ModelConfig>(dir, Self::KIND)?;
        let model = TinyLm::from_parts(config, params)?;
        if tokenizer.vocab_size() != model.config().vocab_size {
            return Err(Error::Checkpoint("tokenizer and model vocabulary sizes differ".into()));
        }
        Ok(Self { model, tokenizer, meta })
    }

    pub fn digest(&self) -> String {
        params_digest(self.model.params())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checkpoint() -> ModelCheckpoint {
        let tokenizer = Tokenizer::build(["buy low sell high"], 64);
        let config = ModelConfig {
            d_model: 8,
            n_layers: 1,
            n_heads: 2,
            d_ff: 8,
            context_length: 16,
            vocab_size: tokenizer.vocab_size(),
            ..ModelConfig::default()
        };
        ModelCheckpoint {
            model: TinyLm::init(config, 5).unwrap(),
            tokenizer,
            meta: TrainingMeta { seed: 5, steps: 0, stage: "init".into(), ..Default::default() },
        }
    }

    #[test]
    fn roundtrip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let ck = checkpoint();
        ck.save(dir.path()).unwrap();
        let back = ModelCheckpoint::load(dir.path()).unwrap();
        assert_eq!(back, ck);
        let ids = [1, 9, 10, 11];
        let a = ck.model.forward(&ids).unwrap();
        let b = back.model.forward(&ids).unwrap();
        assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn corrupted_blob_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        checkpoint().save(dir.path()).unwrap();
        let path = dir.path().join(BLOB_FILE);
        let mut blob = fs::read(&path).unwrap();
        blob[3] ^= 0x40;
        fs::write(&path, blob).unwrap();
        let err = ModelCheckpoint::load(dir.path()).unwrap_err();
        assert!(err.to_string().contains("checksum"));
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let ck = checkpoint();
        save(dir.path(), "classifier", ck.config(), &ck.tokenizer, &ck.meta, ck.model.params()).unwrap();
        assert!(ModelCheckpoint::load(dir.path()).is_err());
    }
}
