use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub const MAX_ORDER: usize = 4;

/// Clipped n-gram counts for orders 1..=4 plus the lengths that set the
/// brevity penalty. Adding two of these pools them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BleuStats {
    pub matches: [usize; MAX_ORDER],
    pub totals: [usize; MAX_ORDER],
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl std::ops::Add for BleuStats {
    type Output = BleuStats;

    fn add(mut self, o: BleuStats) -> BleuStats {
        for k in 0..MAX_ORDER {
            self.matches[k] += o.matches[k];
            self.totals[k] += o.totals[k];
        }
        self.hyp_len += o.hyp_len;
        self.ref_len += o.ref_len;
        self
    }
}

pub(crate) fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for g in tokens.windows(n) {
            *counts.entry(g).or_insert(0) += 1;
        }
    }
    counts
}

/// Reference length closest to `hyp_len`; ties go to the shorter one.
fn closest_ref_len(hyp_len: usize, refs: &[Vec<String>]) -> usize {
    refs.iter().map(Vec::len).min_by_key(|&r| (r.abs_diff(hyp_len), r)).unwrap_or(0)
}

/// Counts one hypothesis against its references. Each hypothesis n-gram is
/// credited at most as often as it occurs in any single reference.
pub fn bleu_stats(hyp: &[String], refs: &[Vec<String>]) -> BleuStats {
    let mut stats = BleuStats { hyp_len: hyp.len(), ref_len: closest_ref_len(hyp.len(), refs), ..Default::default() };
    for n in 1..=MAX_ORDER {
        let hyp_counts = ngram_counts(hyp, n);
        let mut max_ref: HashMap<&[String], usize> = HashMap::new();
        for r in refs {
            for (g, c) in ngram_counts(r, n) {
                let e = max_ref.entry(g).or_insert(0);
                *e = (*e).max(c);
            }
        }
        stats.matches[n - 1] = hyp_counts.iter().map(|(g, &c)| c.min(*max_ref.get(g).unwrap_or(&0))).sum();
        stats.totals[n - 1] = hyp.len().saturating_sub(n - 1);
    }
    stats
}

/// Modified precision of order `k` (1-based). With smoothing, a zero
/// numerator becomes `1 / (total + 1)`.
pub fn precision(stats: &BleuStats, k: usize, smoothing: bool) -> f64 {
    let (m, t) = (stats.matches[k - 1], stats.totals[k - 1]);
    if m == 0 {
        return if smoothing { 1.0 / (t as f64 + 1.0) } else { 0.0 };
    }
    m as f64 / t as f64
}

pub fn brevity_penalty(hyp_len: usize, ref_len: usize) -> f64 {
    if hyp_len == 0 {
        return 0.0;
    }
    if hyp_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    }
}

/// `BP · exp(Σₖ log pₖ / n)` over orders `1..=n`.
pub fn bleu_from_stats(stats: &BleuStats, n: usize, smoothing: bool) -> f64 {
    assert!((1..=MAX_ORDER).contains(&n), "BLEU order must be in 1..=4");
    if stats.hyp_len == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for k in 1..=n {
        let p = precision(stats, k, smoothing);
        if p == 0.0 {
            return 0.0;
        }
        log_sum += p.ln();
    }
    brevity_penalty(stats.hyp_len, stats.ref_len) * (log_sum / n as f64).exp()
}
