use super::rouge::Prf;
use crate::error::{Error, Result};
use crate::knowledge::cosine;
use crate::knowledge::{EmbeddingVector, HashingEmbedder};

/// Words on each side of a token that enter its window.
pub const WINDOW_RADIUS: usize = 1;

/// One embedding per word: the embedder applied to the word and its
/// neighbours within [`WINDOW_RADIUS`].
pub fn token_embeddings(words: &[String], embedder: &HashingEmbedder) -> Vec<EmbeddingVector> {
    (0..words.len())
        .map(|i| {
            let lo = i.saturating_sub(WINDOW_RADIUS);
            let hi = (i + WINDOW_RADIUS + 1).min(words.len());
            embedder.embed(&words[lo..hi].join(" "))
        })
        .collect()
}

fn greedy(from: &[EmbeddingVector], to: &[EmbeddingVector]) -> Result<f64> {
    let mut total = 0.0;
    for u in from {
        let mut best = f64::NEG_INFINITY;
        for v in to {
            best = best.max(cosine(u, v)?);
        }
        total += best;
    }
    Ok(total / from.len() as f64)
}

/// Greedy max-cosine matching between window embeddings of the two word
/// sequences. Precision averages over hypothesis words, recall over
/// reference words.
pub fn embed_score_words(hyp: &[String], reference: &[String], embedder: &HashingEmbedder) -> Result<Prf> {
    if hyp.is_empty() {
        return Err(Error::EmptyInput("hypothesis"));
    }
    if reference.is_empty() {
        return Err(Error::EmptyInput("reference"));
    }
    let h = token_embeddings(hyp, embedder);
    let r = token_embeddings(reference, embedder);
    Ok(Prf::new(greedy(&h, &r)?, greedy(&r, &h)?))
}
