//! Embedding index over verbalized triples.
//!
//! Persisted as pretty-printed JSON:
//!
//! ```text
//! {
//!   "format": "finchat-knowledge-index/1",
//!   "fingerprint": "<embedder fingerprint>",
//!   "dim": 256,
//!   "threshold": 0.7,
//!   "entries": [{"triple": {...}, "text": "...", "embedding": [...]}],
//!   "provenance": {...}
//! }
//! ```

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::embed::{cosine_raw, HashingEmbedder};
use super::{verbalize_text, KnowledgeTriple, VerbalizedFact};
use crate::error::{Error, Result};

pub const FORMAT: &str = "finchat-knowledge-index/1";
pub const DEFAULT_THRESHOLD: f64 = 0.7;
pub const DEFAULT_K: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexEntry {
    pub triple: KnowledgeTriple,
    pub text: String,
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnowledgeIndex {
    pub format: String,
    pub fingerprint: String,
    pub dim: usize,
    pub threshold: f64,
    pub entries: Vec<IndexEntry>,
    #[serde(default)]
    pub provenance: serde_json::Value,
}

impl KnowledgeIndex {
    /// One entry per distinct triple, in first-seen order.
    pub fn build(triples: &[KnowledgeTriple], embedder: &HashingEmbedder, threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::InvalidConfig(format!("threshold {threshold} outside [0,1]")));
        }
        let mut seen = HashSet::new();
        let mut entries = Vec::new();
        for t in triples {
            if !t.is_valid() {
                return Err(Error::InvalidConfig(format!("triple with empty head or tail: {t:?}")));
            }
            if !seen.insert(t.clone()) {
                continue;
            }
            let text = verbalize_text(t);
            let embedding = embedder.embed(&text).into_values();
            entries.push(IndexEntry { triple: t.clone(), text, embedding });
        }
        Ok(Self {
            format: FORMAT.to_string(),
            fingerprint: embedder.fingerprint(),
            dim: embedder.dim(),
            threshold,
            entries,
            provenance: serde_json::Value::Null,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn check_embedder(&self, embedder: &HashingEmbedder) -> Result<()> {
        if embedder.fingerprint() != self.fingerprint {
            return Err(Error::FingerprintMismatch { index: self.fingerprint.clone(), live: embedder.fingerprint() });
        }
        Ok(())
    }

    /// Every entry scored against `query`, best first; equal scores keep
    /// insertion order.
    pub fn scored(&self, embedder: &HashingEmbedder, query: &str) -> Result<Vec<VerbalizedFact>> {
        self.check_embedder(embedder)?;
        let q = embedder.embed(query);
        let mut scored = self
            .entries
            .iter()
            .map(|e| {
                Ok(VerbalizedFact {
                    text: e.text.clone(),
                    source: e.triple.clone(),
                    similarity: cosine_raw(q.values(), &e.embedding)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        // Stable sort keeps insertion order among ties.
        scored.sort_by(|a, b| b.similarity.total_cmp(&a.similarity));
        Ok(scored)
    }

    /// Facts scoring at least the threshold, best first, at most `k`.
    pub fn retrieve(&self, embedder: &HashingEmbedder, query: &str, k: usize) -> Result<Vec<VerbalizedFact>> {
        let mut facts = self.scored(embedder, query)?;
        facts.retain(|f| f.similarity >= self.threshold);
        facts.truncate(k);
        Ok(facts)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let index: Self = serde_json::from_str(&text)?;
        if index.format != FORMAT {
            return Err(Error::Checkpoint(format!("unsupported index format {:?}", index.format)));
        }
        if index.entries.iter().any(|e| e.embedding.len() != index.dim) {
            return Err(Error::DimensionMismatch { left: index.dim, right: 0 });
        }
        Ok(index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::RelationTag;
    use proptest::prelude::*;

    fn triples() -> Vec<KnowledgeTriple> {
        vec![
            KnowledgeTriple::new("mutual funds", RelationTag::UsedFor, "diversifying investments"),
            KnowledgeTriple::new("retirement", RelationTag::RelatedTo, "long-term financial planning"),
            KnowledgeTriple::new("credit cards", RelationTag::UsedFor, "paying utility bills"),
            KnowledgeTriple::new("mutual funds", RelationTag::UsedFor, "diversifying investments"),
        ]
    }

    #[test]
    fn duplicates_collapse() {
        let idx = KnowledgeIndex::build(&triples(), &HashingEmbedder::default(), 0.7).unwrap();
        assert_eq!(idx.len(), 3);
    }

    #[test]
    fn exact_verbalization_scores_one() {
        let e = HashingEmbedder::default();
        let idx = KnowledgeIndex::build(&triples(), &e, 0.7).unwrap();
        let hits = idx.retrieve(&e, "credit cards is used for paying utility bills.", 3).unwrap();
        assert_eq!(hits[0].source, triples()[2]);
        assert!((hits[0].similarity - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_index_returns_nothing() {
        let e = HashingEmbedder::default();
        let idx = KnowledgeIndex::build(&[], &e, 0.7).unwrap();
        assert!(idx.retrieve(&e, "anything", 3).unwrap().is_empty());
    }

    #[test]
    fn fingerprint_mismatch_is_an_error() {
        let idx = KnowledgeIndex::build(&triples(), &HashingEmbedder::default(), 0.7).unwrap();
        let err = idx.retrieve(&HashingEmbedder::new(64), "funds", 3).unwrap_err();
        assert!(matches!(err, Error::FingerprintMismatch { .. }));
    }

    #[test]
    fn threshold_is_range_checked() {
        assert!(KnowledgeIndex::build(&triples(), &HashingEmbedder::default(), 1.5).is_err());
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.json");
        let idx = KnowledgeIndex::build(&triples(), &HashingEmbedder::default(), 0.7).unwrap();
        idx.save(&path).unwrap();
        assert_eq!(KnowledgeIndex::load(&path).unwrap(), idx);
    }

    proptest! {
        #[test]
        fn retrieval_respects_threshold_and_is_prefix_monotone(q in "[a-z ]{0,40}", k in 0usize..5, threshold in 0.0f64..1.0) {
            let e = HashingEmbedder::default();
            let idx = KnowledgeIndex::build(&triples(), &e, threshold).unwrap();
            let all = idx.retrieve(&e, &q, usize::MAX).unwrap();
            let some = idx.retrieve(&e, &q, k).unwrap();
            prop_assert!(some.iter().all(|f| f.similarity >= threshold));
            prop_assert_eq!(&all[..some.len()], &some[..]);
            prop_assert!(some.len() <= k);
        }
    }
}
