//! Automatic response-quality metrics.
//!
//! Every metric reads text through the shared tokenizer (lowercased words
//! with punctuation split off), so scores ignore case and surrounding
//! whitespace. Scores are fractions in `[0, 1]`; [`MetricReport`] scales
//! them by 100.

mod bleu;
mod embed_score;
mod meteor;
mod rouge;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knowledge::HashingEmbedder;
use crate::tinylm::tokenizer::{is_word, split_words};

pub use bleu::{bleu_from_stats, bleu_stats, brevity_penalty, precision, BleuStats, MAX_ORDER};
pub use embed_score::{embed_score_words, token_embeddings, WINDOW_RADIUS};
pub use meteor::{align, meteor_parts, stem, MeteorParts};
pub use rouge::{harmonic_mean, lcs_len, rouge_l_tokens, rouge_n_tokens, Prf};

/// A score with an optional advisory note, such as an empty hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct Scored<T> {
    pub value: T,
    pub warning: Option<String>,
}

pub fn tokens(text: &str) -> Vec<String> {
    split_words(text)
}

fn words(text: &str) -> Vec<String> {
    split_words(text).into_iter().filter(|t| is_word(t)).collect()
}

/// Sentence BLEU up to order `n` against one or more references.
/// `smoothing` turns each zero precision `0/t` into `1/(t+1)`.
pub fn bleu_n(hyp: &str, references: &[&str], n: usize, smoothing: bool) -> Result<Scored<f64>> {
    if !(1..=MAX_ORDER).contains(&n) {
        return Err(Error::InvalidConfig(format!("BLEU order {n} not in 1..=4")));
    }
    if references.is_empty() {
        return Err(Error::EmptyInput("references"));
    }
    let h = tokens(hyp);
    let refs: Vec<Vec<String>> = references.iter().map(|r| tokens(r)).collect();
    let warning = h.is_empty().then(|| "empty hypothesis scores 0".to_string());
    Ok(Scored { value: bleu_from_stats(&bleu_stats(&h, &refs), n, smoothing), warning })
}

pub fn rouge_n(hyp: &str, reference: &str, n: usize) -> Result<Prf> {
    rouge_n_tokens(&tokens(hyp), &tokens(reference), n)
}

pub fn rouge_l(hyp: &str, reference: &str) -> Scored<Prf> {
    let (value, both_empty) = rouge_l_tokens(&tokens(hyp), &tokens(reference));
    Scored { value, warning: both_empty.then(|| "both sides empty".to_string()) }
}

pub fn meteor(hyp: &str, reference: &str) -> f64 {
    meteor_parts(&tokens(hyp), &tokens(reference)).score
}

/// Window-embedding greedy match over the words of each side.
pub fn embed_score(hyp: &str, reference: &str, embedder: &HashingEmbedder) -> Result<Prf> {
    embed_score_words(&words(hyp), &words(reference), embedder)
}

/// Every metric for one hypothesis/reference pair, unscaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScores {
    pub rouge1: Prf,
    pub rouge2: Prf,
    pub rouge_l: Prf,
    /// Sentence BLEU-1..4 with smoothing.
    pub bleu: [f64; MAX_ORDER],
    pub bleu_stats: BleuStats,
    pub embed: Prf,
    pub meteor: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

pub fn score_pair(hyp: &str, reference: &str, embedder: &HashingEmbedder) -> Result<SampleScores> {
    let h = tokens(hyp);
    let r = tokens(reference);
    let mut warnings = Vec::new();
    if h.is_empty() {
        warnings.push("empty hypothesis".to_string());
    }
    let stats = bleu_stats(&h, std::slice::from_ref(&r));
    let bleu = [1, 2, 3, 4].map(|n| bleu_from_stats(&stats, n, true));
    let (rouge_l, both_empty) = rouge_l_tokens(&h, &r);
    if both_empty {
        warnings.push("both sides empty".to_string());
    }
    let (hw, rw) = (words(hyp), words(reference));
    // An empty side has nothing to match; score it 0 instead of failing the corpus.
    let embed = if hw.is_empty() || rw.is_empty() {
        warnings.push("no words for embedding match".to_string());
        Prf::default()
    } else {
        embed_score_words(&hw, &rw, embedder)?
    };
    Ok(SampleScores {
        rouge1: rouge_n_tokens(&h, &r, 1)?,
        rouge2: rouge_n_tokens(&h, &r, 2)?,
        rouge_l,
        bleu,
        bleu_stats: stats,
        embed,
        meteor: meteor_parts(&h, &r).score,
        warnings,
    })
}

/// Corpus-level scores for one setting, every field ×100.
///
/// BLEU pools n-gram counts across samples; ROUGE and METEOR average
/// per-sample F-scores; `bsp`/`bsr` average the embedding precision and
/// recall and `bsf1` is their harmonic mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub r1: f64,
    pub r2: f64,
    pub rl: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
    pub bsp: f64,
    pub bsr: f64,
    pub bsf1: f64,
    /// Percent of responses classified polite; absent without a classifier.
    pub politeness: Option<f64>,
    pub meteor: f64,
    pub sample_count: usize,
}

pub const TABLE_COLUMNS: [&str; 12] = ["R1", "R2", "RL", "B1", "B2", "B3", "B4", "BSP", "BSR", "BSF1", "P", "MS"];

impl MetricReport {
    /// Values in [`TABLE_COLUMNS`] order.
    pub fn columns(&self) -> [Option<f64>; 12] {
        [
            Some(self.r1),
            Some(self.r2),
            Some(self.rl),
            Some(self.b1),
            Some(self.b2),
            Some(self.b3),
            Some(self.b4),
            Some(self.bsp),
            Some(self.bsr),
            Some(self.bsf1),
            self.politeness,
            Some(self.meteor),
        ]
    }

    /// Plain-text table with one header and one row.
    pub fn render(&self) -> String {
        let head: Vec<String> = TABLE_COLUMNS.iter().map(|c| format!("{c:>7}")).collect();
        let row: Vec<String> =
            self.columns().iter().map(|v| v.map_or_else(|| format!("{:>7}", "-"), |v| format!("{v:>7.2}"))).collect();
        format!("{}\n{}\n", head.join(" "), row.join(" "))
    }
}

/// Combines per-sample rows into one report. `politeness` is a percentage
/// computed elsewhere.
pub fn aggregate(rows: &[SampleScores], politeness: Option<f64>) -> Result<MetricReport> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("metric rows"));
    }
    let n = rows.len() as f64;
    let mean = |f: &dyn Fn(&SampleScores) -> f64| 100.0 * rows.iter().map(f).sum::<f64>() / n;
    let pooled = rows.iter().fold(BleuStats::default(), |acc, r| acc + r.bleu_stats);
    let bleu = |k| 100.0 * bleu_from_stats(&pooled, k, true);
    let bsp = mean(&|r| r.embed.precision);
    let bsr = mean(&|r| r.embed.recall);
    Ok(MetricReport {
        r1: mean(&|r| r.rouge1.f1),
        r2: mean(&|r| r.rouge2.f1),
        rl: mean(&|r| r.rouge_l.f1),
        b1: bleu(1),
        b2: bleu(2),
        b3: bleu(3),
        b4: bleu(4),
        bsp,
        bsr,
        bsf1: harmonic_mean(bsp, bsr),
        politeness,
        meteor: mean(&|r| r.meteor),
        sample_count: rows.len(),
    })
}

/// Scores aligned hypothesis/reference lists.
pub fn score_corpus(
    hyps: &[String],
    refs: &[String],
    embedder: &HashingEmbedder,
    politeness: Option<f64>,
) -> Result<(MetricReport, Vec<SampleScores>)> {
    if hyps.len() != refs.len() {
        return Err(Error::DimensionMismatch { left: hyps.len(), right: refs.len() });
    }
    let rows = hyps.iter().zip(refs).map(|(h, r)| score_pair(h, r, embedder)).collect::<Result<Vec<_>>>()?;
    Ok((aggregate(&rows, politeness)?, rows))
}
