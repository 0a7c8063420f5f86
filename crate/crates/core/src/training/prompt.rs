use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::DialogueRecord;
use crate::error::Result;
use crate::knowledge::{
    fuse, verbalize_text, with_history, AugmentedPrompt, FusionMode, HashingEmbedder, KnowledgeIndex, KnowledgeTriple,
    VerbalizedFact, DEFAULT_K,
};
use crate::tinylm::tokenizer::{split_words, BOS, EOS};
use crate::tinylm::{Sequence, Tokenizer};

/// Whether prompts carry retrieved knowledge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    /// Bare query with an empty knowledge segment.
    Wc,
    /// Query fused with the facts retrieved for it.
    Context,
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Setting::Wc => "wc",
            Setting::Context => "context",
        })
    }
}

impl FromStr for Setting {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "wc" => Ok(Setting::Wc),
            "context" => Ok(Setting::Context),
            other => Err(format!("unknown setting {other:?} (expected wc or context)")),
        }
    }
}

/// Keeps the most recent turns whose combined token count fits `budget`.
pub fn truncate_history(history: &[(String, String)], budget: usize) -> &[(String, String)] {
    let mut used = 0;
    let mut start = history.len();
    for (i, (u, b)) in history.iter().enumerate().rev() {
        // Two marker tokens per turn.
        let cost = split_words(u).len() + split_words(b).len() + 2;
        if used + cost > budget {
            break;
        }
        used += cost;
        start = i;
    }
    &history[start..]
}

/// Turns a query plus dialogue history into model input text.
#[derive(Debug, Clone)]
pub struct PromptBuilder<'a> {
    pub setting: Setting,
    pub index: Option<&'a KnowledgeIndex>,
    pub embedder: HashingEmbedder,
    pub fusion: FusionMode,
    pub k: usize,
    /// Token budget for earlier turns; oldest turns are dropped first.
    pub history_budget: usize,
}

impl<'a> PromptBuilder<'a> {
    pub fn new(setting: Setting, index: Option<&'a KnowledgeIndex>) -> Self {
        let embedder = index.map(|i| HashingEmbedder::new(i.dim)).unwrap_or_default();
        Self { setting, index, embedder, fusion: FusionMode::Textual, k: DEFAULT_K, history_budget: 64 }
    }

    pub fn with_history_budget(mut self, budget: usize) -> Self {
        self.history_budget = budget;
        self
    }

    pub fn with_fusion(mut self, fusion: FusionMode) -> Self {
        self.fusion = fusion;
        self
    }

    /// Facts retrieved for `query`; always empty in the bare setting.
    pub fn facts(&self, query: &str) -> Result<Vec<VerbalizedFact>> {
        match (self.setting, self.index) {
            (Setting::Context, Some(index)) => index.retrieve(&self.embedder, query, self.k),
            _ => Ok(Vec::new()),
        }
    }

    pub fn build(&self, history: &[(String, String)], query: &str) -> Result<(AugmentedPrompt, Vec<VerbalizedFact>)> {
        let facts = self.facts(query)?;
        let mut prompt = fuse(query, &facts, self.fusion, &self.embedder);
        prompt.text = with_history(truncate_history(history, self.history_budget), &prompt.text);
        Ok((prompt, facts))
    }
}

/// Vocabulary over every utterance plus the fact sentences the index can
/// splice into prompts.
pub fn build_tokenizer(records: &[DialogueRecord], triples: &[KnowledgeTriple], max_vocab: usize) -> Tokenizer {
    let facts: Vec<String> = triples.iter().map(verbalize_text).collect();
    let texts = records
        .iter()
        .flat_map(|r| r.turns.iter().flat_map(|t| [t.user.as_str(), t.bot.as_str()]))
        .chain(facts.iter().map(String::as_str));
    Tokenizer::build(texts, max_vocab)
}

/// `[BOS] prompt` scored on `target [EOS]`.
///
/// When the pair exceeds `capacity` positions the prompt loses its oldest
/// tokens (BOS is kept); a target that alone overflows is cut at the end.
pub fn encode_example(
    tokenizer: &Tokenizer,
    prompt: &str,
    target: &str,
    knowledge: Option<Vec<f64>>,
    capacity: usize,
) -> Sequence {
    let mut completion = tokenizer.encode(target);
    completion.push(EOS);
    completion.truncate(capacity.saturating_sub(2).max(1));
    let body = tokenizer.encode(prompt);
    let room = capacity.saturating_sub(completion.len() + 1);
    let mut ids = vec![BOS];
    ids.extend_from_slice(&body[body.len().saturating_sub(room)..]);
    Sequence { prompt: ids, completion, knowledge }
}
