use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{DialogueRecord, DomainTag, RegionTag};
use crate::error::{Error, Result};
use crate::tinylm::tokenizer::split_words;

/// Corpus summary in the shape of a dataset statistics table.
///
/// Token counts use the shared word-level tokenizer (punctuation tokens
/// included). Bigrams are counted over user queries, trigrams over every
/// utterance; n-grams never cross utterance boundaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub records: usize,
    pub turns: usize,
    pub vocabulary_size: usize,
    pub avg_user_tokens: f64,
    pub avg_bot_tokens: f64,
    pub avg_user_sentences: f64,
    pub avg_bot_sentences: f64,
    /// Mean whitespace-delimited words per dialogue, user and bot combined.
    pub words_per_conversation: f64,
    pub unique_bigrams: usize,
    pub unique_trigrams: usize,
    pub per_domain_counts: BTreeMap<DomainTag, usize>,
    pub per_region_counts: BTreeMap<RegionTag, usize>,
}

/// Sentences end at `.`, `!` or `?` followed by whitespace or end of text;
/// a trailing fragment without a terminator still counts.
pub fn count_sentences(text: &str) -> usize {
    let chars: Vec<char> = text.chars().collect();
    let mut count = 0;
    let mut has_content = false;
    for (i, &c) in chars.iter().enumerate() {
        if matches!(c, '.' | '!' | '?') {
            let boundary = chars.get(i + 1).is_none_or(|n| n.is_whitespace());
            if boundary {
                if has_content {
                    count += 1;
                }
                has_content = false;
                continue;
            }
        }
        if !c.is_whitespace() && !matches!(c, '.' | '!' | '?') {
            has_content = true;
        }
    }
    if has_content {
        count += 1;
    }
    count
}

pub fn corpus_stats(records: &[DialogueRecord]) -> Result<CorpusStats> {
    if records.is_empty() {
        return Err(Error::EmptyInput("corpus"));
    }
    let mut vocab: HashSet<String> = HashSet::new();
    let mut bigrams: HashSet<(String, String)> = HashSet::new();
    let mut trigrams: HashSet<(String, String, String)> = HashSet::new();
    let (mut user_tokens, mut bot_tokens, mut user_sents, mut bot_sents) = (0usize, 0usize, 0usize, 0usize);
    let mut words = 0usize;
    let mut turns = 0usize;
    let mut per_domain: BTreeMap<DomainTag, usize> = DomainTag::ALL.iter().map(|&d| (d, 0)).collect();
    let mut per_region: BTreeMap<RegionTag, usize> = RegionTag::ALL.iter().map(|&r| (r, 0)).collect();

    for r in records {
        *per_domain.entry(r.domain).or_default() += 1;
        *per_region.entry(r.region).or_default() += 1;
        for t in &r.turns {
            turns += 1;
            let u = split_words(&t.user);
            let b = split_words(&t.bot);
            user_tokens += u.len();
            bot_tokens += b.len();
            user_sents += count_sentences(&t.user);
            bot_sents += count_sentences(&t.bot);
            words += t.user.split_whitespace().count() + t.bot.split_whitespace().count();
            for w in u.windows(2) {
                bigrams.insert((w[0].clone(), w[1].clone()));
            }
            for toks in [&u, &b] {
                for w in toks.windows(3) {
                    trigrams.insert((w[0].clone(), w[1].clone(), w[2].clone()));
                }
            }
            vocab.extend(u);
            vocab.extend(b);
        }
    }
    let nt = turns as f64;
    Ok(CorpusStats {
        records: records.len(),
        turns,
        vocabulary_size: vocab.len(),
        avg_user_tokens: user_tokens as f64 / nt,
        avg_bot_tokens: bot_tokens as f64 / nt,
        avg_user_sentences: user_sents as f64 / nt,
        avg_bot_sentences: bot_sents as f64 / nt,
        words_per_conversation: words as f64 / records.len() as f64,
        unique_bigrams: bigrams.len(),
        unique_trigrams: trigrams.len(),
        per_domain_counts: per_domain,
        per_region_counts: per_region,
    })
}
