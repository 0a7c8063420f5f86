use rand::seq::SliceRandom;

use super::DialogueRecord;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusSplit {
    pub train: Vec<DialogueRecord>,
    pub dev: Vec<DialogueRecord>,
    pub test: Vec<DialogueRecord>,
}

/// Seeded train/dev/test partition.
///
/// Records are shuffled with the `split` substream; train and dev take
/// `floor(fraction · n)` records each and test takes the remainder. Each part
/// keeps the input order of its records.
pub fn split_corpus(records: &[DialogueRecord], fractions: (f64, f64, f64), seed: u64) -> Result<CorpusSplit> {
    let (ft, fd, fe) = fractions;
    if [ft, fd, fe].iter().any(|f| !f.is_finite() || *f < 0.0) {
        return Err(Error::InvalidFractions(format!("{fractions:?} has a negative or non-finite entry")));
    }
    if ((ft + fd + fe) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidFractions(format!("{fractions:?} does not sum to 1")));
    }
    let n = records.len();
    let n_train = (ft * n as f64 + 1e-9).floor() as usize;
    let n_dev = ((fd * n as f64 + 1e-9).floor() as usize).min(n - n_train);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::substream(seed, rng::SPLIT));
    let mut part = vec![2u8; n];
    for &i in &order[..n_train] {
        part[i] = 0;
    }
    for &i in &order[n_train..n_train + n_dev] {
        part[i] = 1;
    }
    let pick = |p: u8| records.iter().zip(&part).filter(|(_, &q)| q == p).map(|(r, _)| r.clone()).collect();
    Ok(CorpusSplit { train: pick(0), dev: pick(1), test: pick(2) })
}
