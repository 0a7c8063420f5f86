use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::prompt::{encode_example, PromptBuilder};
use crate::corpus::synth::IMPOLITE_OPENERS;
use crate::corpus::{DialogueRecord, PolitenessLabel};
use crate::error::Result;
use crate::rng;
use crate::tinylm::{ModelCheckpoint, Sampler, SamplerConfig};

/// Clause prepended when a response holds no verb to negate.
pub const MISLEADING_PREFIX: &str = "Contrary to what experts say, none of this is true:";

const NEGATABLE: [&str; 6] = ["is", "are", "can", "will", "should", "does"];

/// How the rejected response was derived from the gold one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionMode {
    /// An impolite template is prepended.
    ImpolitePrefix,
    /// The response is replaced by one the policy samples for a prompt from
    /// a different dialogue.
    OffPolicy,
    /// A factual clause is negated.
    Negation,
}

impl CorruptionMode {
    pub const ALL: [CorruptionMode; 3] =
        [CorruptionMode::ImpolitePrefix, CorruptionMode::OffPolicy, CorruptionMode::Negation];
}

impl fmt::Display for CorruptionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorruptionMode::ImpolitePrefix => "impolite_prefix",
            CorruptionMode::OffPolicy => "off_policy",
            CorruptionMode::Negation => "negation",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreferenceRecord {
    pub prompt: String,
    pub y_plus: String,
    pub y_minus: String,
    pub gold: String,
    pub corruption_mode: CorruptionMode,
}

/// The mode of each of `n` records: one uniform draw from `{0,1,2}` per
/// record, in order, from the `corruption` substream.
pub fn draw_corruption_modes(seed: u64, n: usize) -> Vec<CorruptionMode> {
    let mut rng = rng::substream(seed, rng::CORRUPTION);
    (0..n).map(|_| CorruptionMode::ALL[rng.random_range(0..3)]).collect()
}

/// Inserts "not" after the first negatable auxiliary; without one, prepends
/// [`MISLEADING_PREFIX`].
pub fn corrupt_negation(text: &str) -> String {
    let words: Vec<&str> = text.split_whitespace().collect();
    match words.iter().position(|w| NEGATABLE.contains(&w.to_ascii_lowercase().as_str())) {
        Some(i) => {
            let mut out: Vec<&str> = words[..=i].to_vec();
            out.push("not");
            out.extend_from_slice(&words[i + 1..]);
            out.join(" ")
        }
        None => format!("{MISLEADING_PREFIX} {}", text.trim()),
    }
}

/// Preference triples for every turn of every polite dialogue.
///
/// `y_plus` and `gold` are the annotated response. `y_minus` comes from the
/// corruption menu; the mode sequence depends only on `seed` (see
/// [`draw_corruption_modes`]), template choices use their own substream and
/// off-policy responses are sampled from `policy` with a third one. The donor
/// prompt of an off-policy response is the next turn (cyclically) that belongs
/// to another dialogue, so the sample answers a different question.
pub fn build_preference_set(
    records: &[DialogueRecord],
    policy: &ModelCheckpoint,
    builder: &PromptBuilder<'_>,
    seed: u64,
) -> Result<Vec<PreferenceRecord>> {
    let mut items = Vec::new();
    let mut owners = Vec::new();
    for (r, record) in records.iter().filter(|r| r.politeness == PolitenessLabel::Polite).enumerate() {
        let mut history: Vec<(String, String)> = Vec::new();
        for turn in &record.turns {
            let (prompt, _) = builder.build(&history, &turn.user)?;
            items.push((prompt, turn.bot.clone()));
            owners.push(r);
            history.push((turn.user.clone(), turn.bot.clone()));
        }
    }

    let modes = draw_corruption_modes(seed, items.len());
    let mut templates = rng::substream(seed, rng::CORRUPTION_TEMPLATE);
    let mut sampler = Sampler::new(SamplerConfig {
        seed: rng::derive_seed(seed, rng::CORRUPTION_SAMPLING),
        ..SamplerConfig::default()
    })?;
    let capacity = policy.model.config().token_capacity();

    let n = items.len();
    let mut out = Vec::with_capacity(n);
    for (i, mode) in modes.into_iter().enumerate() {
        let (prompt, gold) = &items[i];
        let y_minus = match mode {
            CorruptionMode::ImpolitePrefix => {
                let t = IMPOLITE_OPENERS[templates.random_range(0..IMPOLITE_OPENERS.len())];
                format!("{t} {}", gold.trim())
            }
            CorruptionMode::Negation => corrupt_negation(gold),
            CorruptionMode::OffPolicy => {
                let donor = (1..n).map(|d| (i + d) % n).find(|&j| owners[j] != owners[i]);
                let candidate = match donor {
                    Some(j) => {
                        let (donor_prompt, _) = &items[j];
                        let knowledge = donor_prompt.knowledge.clone().map(|k| k.into_values());
                        let seq = encode_example(&policy.tokenizer, &donor_prompt.text, "", knowledge, capacity);
                        let room = capacity.saturating_sub(seq.prompt.len());
                        sampler.set_max_target_length(policy.tokenizer.encode(gold).len() + 4);
                        let ids = if room == 0 {
                            Vec::new()
                        } else {
                            sampler.generate(&policy.model, &seq.prompt, seq.knowledge.as_deref())?
                        };
                        policy.tokenizer.decode(&ids).trim().to_string()
                    }
                    None => String::new(),
                };
                // Compare token streams: a decoded copy of gold differs only in spacing.
                if candidate.is_empty() || policy.tokenizer.encode(&candidate) == policy.tokenizer.encode(gold) {
                    corrupt_negation(gold)
                } else {
                    candidate
                }
            }
        };
        let (prompt, gold) = (prompt.text.clone(), gold.clone());
        out.push(PreferenceRecord { prompt, y_plus: gold.clone(), y_minus, gold, corruption_mode: mode });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negation_inserts_not() {
        assert_eq!(corrupt_negation("Index funds is used for saving."), "Index funds is not used for saving.");
        assert_eq!(corrupt_negation("Pay it off."), format!("{MISLEADING_PREFIX} Pay it off."));
        assert_eq!(corrupt_negation("It Will rain"), "It Will not rain");
    }

    #[test]
    fn mode_draws_are_reproducible() {
        let a = draw_corruption_modes(11, 40);
        assert_eq!(a, draw_corruption_modes(11, 40));
        assert_eq!(&draw_corruption_modes(11, 50)[..40], &a[..]);
        for m in CorruptionMode::ALL {
            assert!(a.contains(&m));
        }
    }

    #[test]
    fn mode_names_serialize() {
        for m in CorruptionMode::ALL {
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{m}\""));
        }
    }
}
