use serde::{Deserialize, Serialize};

use super::bleu::ngram_counts;
use crate::error::{Error, Result};

/// Precision, recall and their harmonic mean.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn new(precision: f64, recall: f64) -> Self {
        Self { precision, recall, f1: harmonic_mean(precision, recall) }
    }
}

pub fn harmonic_mean(a: f64, b: f64) -> f64 {
    if a + b == 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Clipped n-gram overlap; recall is over reference n-grams.
pub fn rouge_n_tokens(hyp: &[String], reference: &[String], n: usize) -> Result<Prf> {
    if reference.is_empty() {
        return Err(Error::EmptyInput("reference"));
    }
    if !(1..=2).contains(&n) {
        return Err(Error::InvalidConfig(format!("ROUGE-N order {n} not in 1..=2")));
    }
    let h = ngram_counts(hyp, n);
    let r = ngram_counts(reference, n);
    let overlap: usize = h.iter().map(|(g, &c)| c.min(*r.get(g).unwrap_or(&0))).sum();
    Ok(Prf::new(ratio(overlap, h.values().sum()), ratio(overlap, r.values().sum())))
}

pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// LCS-based scores. The flag is set when both sides are empty.
pub fn rouge_l_tokens(hyp: &[String], reference: &[String]) -> (Prf, bool) {
    if hyp.is_empty() && reference.is_empty() {
        return (Prf::default(), true);
    }
    let l = lcs_len(hyp, reference);
    (Prf::new(ratio(l, hyp.len()), ratio(l, reference.len())), false)
}
