//! Knowledge-grounded financial dialogue pipeline at desk scale.
//!
//! The crate covers the whole flow from corpus tooling to evaluation:
//!
//! - [`corpus`]: multi-turn dialogue records, validation, statistics, splits
//!   and a seeded synthetic generator.
//! - [`knowledge`]: commonsense triples, template verbalization, hashing
//!   embeddings, thresholded retrieval and prompt fusion.
//! - [`tinylm`]: a small decoder-only transformer with its own reverse-mode
//!   differentiation, Adam, top-k sampling and portable checkpoints.
//! - [`training`]: supervised fine-tuning and preference optimization.
//! - [`politeness`]: a three-class politeness classifier.
//! - [`metrics`]: BLEU, ROUGE, METEOR and an embedding greedy-match score.
//! - [`harness`]: the four-setting ablation and scorecard export.

pub mod corpus;
pub mod error;
pub mod harness;
pub mod knowledge;
pub mod metrics;
pub mod politeness;
pub mod rng;
pub mod tinylm;
pub mod training;

pub use error::{Error, Result};

pub use corpus::{DialogueRecord, DomainTag, EFairScore, PolitenessLabel, RegionTag, Turn};
pub use harness::{AblationResult, AblationSetting};
pub use knowledge::{HashingEmbedder, KnowledgeIndex, KnowledgeTriple, RelationTag};
pub use metrics::MetricReport;
pub use politeness::PolitenessClassifier;
pub use tinylm::{ModelCheckpoint, ModelConfig, SamplerConfig, TinyLm, Tokenizer};
pub use training::{DpoConfig, PreferenceRecord, Setting, TrainConfig};
