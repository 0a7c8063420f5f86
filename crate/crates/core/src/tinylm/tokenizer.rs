//! Word-level tokenizer shared by the language model, the classifier, the
//! corpus statistics and the metrics.

use std::collections::HashMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;
pub const UNK: u32 = 3;
pub const KNOWLEDGE: u32 = 4;
pub const QUERY: u32 = 5;
pub const RESPONSE: u32 = 6;
pub const USER: u32 = 7;
pub const BOT: u32 = 8;

pub const KNOWLEDGE_MARKER: &str = "[KNOWLEDGE]";
pub const QUERY_MARKER: &str = "[QUERY]";
pub const RESPONSE_MARKER: &str = "[RESPONSE]";
pub const USER_MARKER: &str = "[USER]";
pub const BOT_MARKER: &str = "[BOT]";

/// Reserved token strings, indexed by their fixed ids.
pub const RESERVED: [&str; 9] =
    ["<pad>", "<bos>", "<eos>", "<unk>", KNOWLEDGE_MARKER, QUERY_MARKER, RESPONSE_MARKER, USER_MARKER, BOT_MARKER];

fn token_pattern() -> &'static Regex {
    static PATTERN: OnceLock<Regex> = OnceLock::new();
    PATTERN.get_or_init(|| {
        Regex::new(r"\[(?:KNOWLEDGE|QUERY|RESPONSE|USER|BOT)\]|[^\W_]+(?:['-][^\W_]+)*|\S")
            .expect("static token pattern")
    })
}

/// Splits text into lowercased word, number and punctuation tokens.
///
/// Words may carry inner apostrophes or hyphens (`you're`, `spoon-feed`);
/// every other non-space character is a token on its own. The literal
/// prompt markers survive as single tokens.
pub fn split_words(text: &str) -> Vec<String> {
    token_pattern()
        .find_iter(text)
        .map(|m| {
            let s = m.as_str();
            if s.starts_with('[') && s.len() > 1 {
                s.to_string()
            } else {
                s.to_lowercase()
            }
        })
        .collect()
}

/// True for tokens made of letters or digits (not punctuation, not markers).
pub fn is_word(token: &str) -> bool {
    token.chars().next().is_some_and(|c| c.is_alphanumeric())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokenizer {
    vocab: Vec<String>,
    max_vocab: usize,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl Tokenizer {
    /// Builds a vocabulary from `texts`, most frequent tokens first (ties in
    /// lexical order), capped at `max_vocab` entries including the reserved ids.
    pub fn build<'a, I>(texts: I, max_vocab: usize) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut counts: HashMap<String, usize> = HashMap::new();
        for text in texts {
            for tok in split_words(text) {
                *counts.entry(tok).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> =
            counts.into_iter().filter(|(t, _)| !RESERVED.contains(&t.as_str())).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

        let mut vocab: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        let room = max_vocab.saturating_sub(vocab.len());
        vocab.extend(ranked.into_iter().take(room).map(|(t, _)| t));
        Self::from_vocab(vocab, max_vocab)
    }

    /// Restores a tokenizer from its vocabulary list. The reserved tokens
    /// must occupy their fixed ids.
    pub fn from_vocab(vocab: Vec<String>, max_vocab: usize) -> Self {
        let index = vocab.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        Self { vocab, max_vocab, index }
    }

    /// Rebuilds the lookup table after deserialization.
    pub fn reindex(&mut self) {
        self.index = self.vocab.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
    }

    pub fn reserved_ok(&self) -> bool {
        self.vocab.len() >= RESERVED.len() && RESERVED.iter().zip(&self.vocab).all(|(r, v)| r == v)
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn max_vocab(&self) -> usize {
        self.max_vocab
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.vocab.get(id as usize).map(String::as_str)
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn encode(&self, text: &str) -> Vec<u32> {
        split_words(text).iter().map(|t| self.index.get(t).copied().unwrap_or(UNK)).collect()
    }

    /// Joins tokens with single spaces, dropping PAD, BOS and EOS.
    pub fn decode(&self, ids: &[u32]) -> String {
        ids.iter()
            .filter(|&&id| !matches!(id, PAD | BOS | EOS))
            .map(|&id| self.token(id).unwrap_or(RESERVED[UNK as usize]))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn splits_words_and_punctuation() {
        assert_eq!(
            split_words("Okay! Let me spoon-feed you, it's $500."),
            ["okay", "!", "let", "me", "spoon-feed", "you", ",", "it's", "$", "500", "."]
        );
        assert_eq!(
            split_words("[KNOWLEDGE] a. [QUERY] Hi [RESPONSE]"),
            ["[KNOWLEDGE]", "a", ".", "[QUERY]", "hi", "[RESPONSE]"]
        );
        assert!(split_words("   ").is_empty());
    }

    #[test]
    fn reserved_ids_are_fixed() {
        let tok = Tokenizer::build(["hello world hello"], 100);
        assert!(tok.reserved_ok());
        assert_eq!(tok.id("[RESPONSE]"), Some(RESPONSE));
        assert_eq!(tok.id("hello"), Some(RESERVED.len() as u32));
        assert_eq!(tok.encode("hello mars"), vec![9, UNK]);
    }

    #[test]
    fn vocabulary_cap_is_respected() {
        let tok = Tokenizer::build(["a b c d e f g"], 12);
        assert_eq!(tok.vocab_size(), 12);
    }

    proptest! {
        #[test]
        fn decode_encode_roundtrip(words in prop::collection::vec("[a-z]{1,6}", 1..12)) {
            let text = words.join(" ");
            let tok = Tokenizer::build([text.as_str()], 1000);
            let ids = tok.encode(&text);
            prop_assert_eq!(tok.decode(&ids), text.clone());
            prop_assert_eq!(tok.encode(&tok.decode(&ids)), ids);
        }
    }
}
