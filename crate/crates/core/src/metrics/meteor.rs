/// Suffix stripper: `-ing` (words over 5 letters), `-ed` and `-es` (over 4),
/// `-s` (over 3, but not `-ss`). At most one rule fires.
pub fn stem(word: &str) -> &str {
    let n = word.len();
    if n > 5 && word.ends_with("ing") {
        &word[..n - 3]
    } else if n > 4 && (word.ends_with("ed") || word.ends_with("es")) {
        &word[..n - 2]
    } else if n > 3 && word.ends_with('s') && !word.ends_with("ss") {
        &word[..n - 1]
    } else {
        word
    }
}

/// Intermediate quantities, exposed for worksheets.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeteorParts {
    pub matches: usize,
    pub chunks: usize,
    pub precision: f64,
    pub recall: f64,
    pub fmean: f64,
    pub penalty: f64,
    pub score: f64,
}

/// Alignment as `(hyp index, ref index)` pairs sorted by hypothesis index.
///
/// Stage one walks the hypothesis left to right and takes the first unused
/// reference token with the same surface form; stage two repeats that for
/// the leftovers comparing stems.
pub fn align(hyp: &[String], reference: &[String]) -> Vec<(usize, usize)> {
    let mut used_h = vec![false; hyp.len()];
    let mut used_r = vec![false; reference.len()];
    let mut pairs = Vec::new();
    for stage in 0..2 {
        for (i, h) in hyp.iter().enumerate() {
            if used_h[i] {
                continue;
            }
            let hit = reference
                .iter()
                .enumerate()
                .position(|(j, r)| !used_r[j] && if stage == 0 { h == r } else { stem(h) == stem(r) });
            if let Some(j) = hit {
                used_h[i] = true;
                used_r[j] = true;
                pairs.push((i, j));
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

pub fn meteor_parts(hyp: &[String], reference: &[String]) -> MeteorParts {
    let pairs = align(hyp, reference);
    let m = pairs.len();
    if m == 0 {
        return MeteorParts::default();
    }
    let chunks = 1 + pairs.windows(2).filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1)).count();
    let precision = m as f64 / hyp.len() as f64;
    let recall = m as f64 / reference.len() as f64;
    let fmean = 10.0 * precision * recall / (recall + 9.0 * precision);
    let penalty = 0.5 * (chunks as f64 / m as f64).powi(3);
    MeteorParts { matches: m, chunks, precision, recall, fmean, penalty, score: fmean * (1.0 - penalty) }
}
