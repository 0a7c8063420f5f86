//! Supervised fine-tuning and preference optimization.
//!
//! The pipeline order is fixed: a model is first fine-tuned on
//! `(prompt, gold response)` pairs, then the resulting checkpoint is refined
//! with the preference loss on `(prompt, preferred, rejected)` triples built
//! from the same corpus.

mod dpo;
mod preference;
mod prompt;
mod sft;

pub use dpo::{
    dpo_loss, dpo_loss_from_log_probs, dpo_loss_node, encode_preferences, mean_margin, preference_log_probs,
    ranking_accuracy, train_dpo, DpoConfig, DpoReport, PreferencePair,
};
pub use preference::{
    build_preference_set, corrupt_negation, draw_corruption_modes, CorruptionMode, PreferenceRecord, MISLEADING_PREFIX,
};
pub use prompt::{build_tokenizer, encode_example, truncate_history, PromptBuilder, Setting};
pub use sft::{build_sft_examples, encode_sft, train_sft, train_sft_observed, SftExample, TrainConfig};
