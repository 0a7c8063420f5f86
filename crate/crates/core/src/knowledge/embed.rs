//! Signed feature hashing over word unigrams and bigrams.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::fnv1a64;
use crate::tinylm::tokenizer::{is_word, split_words};

pub const DEFAULT_DIM: usize = 256;

/// Fixed-length vector with unit Euclidean norm, or all zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    /// L2-normalizes `raw`; the zero vector stays zero.
    pub fn from_raw(mut raw: Vec<f64>) -> Self {
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            raw.iter_mut().for_each(|x| *x /= norm);
        }
        Self(raw)
    }

    /// Wraps values as-is, without normalizing.
    pub fn from_values(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }
}

/// `u·v / (‖u‖‖v‖)`, or 0 when either side is the zero vector.
pub fn cosine(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64> {
    cosine_raw(u.values(), v.values())
}

pub(crate) fn cosine_raw(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch { left: u.len(), right: v.len() });
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    Ok(dot / (nu * nv))
}

/// Deterministic text embedder.
///
/// Text is lowercased and tokenized with the shared tokenizer; punctuation
/// and prompt markers are dropped. Every word unigram `w` and bigram `w1 w2`
/// is hashed with 64-bit FNV-1a: bucket `h mod d`, sign `+1` when the top bit
/// of `h` is clear and `-1` otherwise. Contributions accumulate and the sum
/// is L2-normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashingEmbedder {
    dim: usize,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self { dim: DEFAULT_DIM }
    }
}

impl HashingEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Hash of everything that determines the embedding function.
    pub fn fingerprint(&self) -> String {
        let descriptor = format!("fnv1a64-signed|word-unigram+bigram|lowercase|l2|d={}", self.dim);
        format!("{:016x}", fnv1a64(descriptor.as_bytes()))
    }

    pub fn features(text: &str) -> Vec<String> {
        let words: Vec<String> = split_words(text).into_iter().filter(|t| is_word(t)).collect();
        let mut out = words.clone();
        out.extend(words.windows(2).map(|w| format!("{} {}", w[0], w[1])));
        out
    }

    /// Accumulated signed counts before normalization.
    pub fn embed_raw(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for f in Self::features(text) {
            let h = fnv1a64(f.as_bytes());
            let bucket = (h % self.dim as u64) as usize;
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            v[bucket] += sign;
        }
        v
    }

    pub fn embed(&self, text: &str) -> EmbeddingVector {
        EmbeddingVector::from_raw(self.embed_raw(text))
    }
}
