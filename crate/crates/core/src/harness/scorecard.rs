//! Per-sample scorecards for offline human rating.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AblationResult, AblationSetting};
use crate::error::{Error, Result};
use crate::metrics::SampleScores;

pub const RATING_CRITERIA: [&str; 5] =
    ["fluency", "adequacy", "consistency", "financial_term_retention", "readability"];

/// 1–5 ratings; `null` until a rater fills them in.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ratings {
    pub fluency: Option<f64>,
    pub adequacy: Option<f64>,
    pub consistency: Option<f64>,
    pub financial_term_retention: Option<f64>,
    pub readability: Option<f64>,
}

impl Ratings {
    pub fn values(&self) -> [Option<f64>; 5] {
        [self.fluency, self.adequacy, self.consistency, self.financial_term_retention, self.readability]
    }

    fn from_values(v: [Option<f64>; 5]) -> Self {
        Self { fluency: v[0], adequacy: v[1], consistency: v[2], financial_term_retention: v[3], readability: v[4] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scorecard {
    pub setting: AblationSetting,
    pub id: String,
    pub turn: usize,
    pub prompt: String,
    pub gold: String,
    pub generated: String,
    pub metrics: SampleScores,
    pub ratings: Ratings,
}

/// Writes one scorecard per stored sample, ratings left empty.
pub fn export_scorecards(result: &AblationResult, path: &Path) -> Result<usize> {
    let cards: Vec<Scorecard> = result
        .samples
        .iter()
        .map(|s| Scorecard {
            setting: result.setting,
            id: s.id.clone(),
            turn: s.turn,
            prompt: s.prompt.clone(),
            gold: s.gold.clone(),
            generated: s.generated.clone(),
            metrics: s.scores.clone(),
            ratings: Ratings::default(),
        })
        .collect();
    fs::write(path, crate::corpus::to_jsonl(&cards)?).map_err(|e| Error::io(path, e))?;
    Ok(cards.len())
}

pub fn load_scorecards(path: &Path) -> Result<Vec<Scorecard>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let card: Scorecard =
            serde_json::from_str(line).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
        for v in card.ratings.values().into_iter().flatten() {
            if !(1.0..=5.0).contains(&v) {
                return Err(Error::Parse { line: i + 1, message: format!("rating {v} outside [1,5]") });
            }
        }
        out.push(card);
    }
    Ok(out)
}

/// Per-criterion mean over the cards that carry a rating for it.
pub fn mean_ratings(cards: &[Scorecard]) -> Ratings {
    let mut sums = [0.0; 5];
    let mut counts = [0usize; 5];
    for c in cards {
        for (i, v) in c.ratings.values().into_iter().enumerate() {
            if let Some(v) = v {
                sums[i] += v;
                counts[i] += 1;
            }
        }
    }
    Ratings::from_values(std::array::from_fn(|i| (counts[i] > 0).then(|| sums[i] / counts[i] as f64)))
}
