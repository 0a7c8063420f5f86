use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::preference::PreferenceRecord;
use super::prompt::encode_example;
use crate::error::{Error, Result};
use crate::rng;
use crate::tinylm::autograd::{softplus, NodeId};
use crate::tinylm::{
    adam_step, AdamState, Gradients, Graph, ModelCheckpoint, Sequence, TinyLm, Tokenizer, TrainingMeta,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DpoConfig {
    pub beta: f64,
    /// Subtract the log-probabilities of a frozen copy of the starting policy.
    pub use_reference: bool,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for DpoConfig {
    fn default() -> Self {
        Self { beta: 0.1, use_reference: false, epochs: 3, batch_size: 8, lr: 1e-4, weight_decay: 0.01, seed: 0 }
    }
}

impl DpoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidConfig(format!("beta must be positive, got {}", self.beta)));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("epochs and batch_size must be positive".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite() && self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::InvalidConfig("lr and weight_decay must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// A preference record encoded for scoring: both sequences share the prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferencePair {
    pub chosen: Sequence,
    pub rejected: Sequence,
}

pub fn encode_preferences(tokenizer: &Tokenizer, records: &[PreferenceRecord], capacity: usize) -> Vec<PreferencePair> {
    records
        .iter()
        .map(|r| PreferencePair {
            chosen: encode_example(tokenizer, &r.prompt, &r.y_plus, None, capacity),
            rejected: encode_example(tokenizer, &r.prompt, &r.y_minus, None, capacity),
        })
        .collect()
}

/// `(log P(y⁺|x), log P(y⁻|x))` per pair.
pub fn preference_log_probs(model: &TinyLm, pairs: &[PreferencePair]) -> Result<Vec<(f64, f64)>> {
    pairs.iter().map(|p| Ok((model.sequence_log_prob(&p.chosen)?, model.sequence_log_prob(&p.rejected)?))).collect()
}

/// Mean of `softplus(−β·Δ)` where `Δ = lp⁺ − lp⁻`, minus the same difference
/// under the reference when one is given. `softplus(−x) = −log σ(x)`.
pub fn dpo_loss_from_log_probs(policy: &[(f64, f64)], reference: Option<&[(f64, f64)]>, beta: f64) -> Result<f64> {
    if policy.is_empty() {
        return Err(Error::EmptyInput("preference batch"));
    }
    if let Some(r) = reference {
        if r.len() != policy.len() {
            return Err(Error::DimensionMismatch { left: policy.len(), right: r.len() });
        }
    }
    let total: f64 = policy
        .iter()
        .enumerate()
        .map(|(i, (p, m))| {
            let ref_delta = reference.map_or(0.0, |r| r[i].0 - r[i].1);
            softplus(-beta * ((p - m) - ref_delta))
        })
        .sum();
    Ok(total / policy.len() as f64)
}

/// Records the batch loss on `g`. `reference` holds precomputed reference
/// log-probabilities, one pair per batch entry.
pub fn dpo_loss_node(
    g: &mut Graph<'_>,
    policy: &TinyLm,
    batch: &[PreferencePair],
    reference: Option<&[(f64, f64)]>,
    beta: f64,
) -> Result<NodeId> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("preference batch"));
    }
    if let Some(r) = reference {
        if r.len() != batch.len() {
            return Err(Error::DimensionMismatch { left: batch.len(), right: r.len() });
        }
    }
    let mut terms = Vec::with_capacity(batch.len());
    for (i, pair) in batch.iter().enumerate() {
        let plus = policy.log_prob_node(g, &pair.chosen)?;
        let minus = policy.log_prob_node(g, &pair.rejected)?;
        let mut delta = g.sub(plus, minus);
        if let Some(r) = reference {
            let offset = g.constant(ndarray::arr2(&[[r[i].0 - r[i].1]]));
            delta = g.sub(delta, offset);
        }
        let neg_margin = g.scale(delta, -beta);
        terms.push(g.softplus(neg_margin));
    }
    let total = g.sum(&terms);
    Ok(g.scale(total, 1.0 / batch.len() as f64))
}

/// Preference loss of `policy` on `batch`.
///
/// With `use_reference` the margins become log-ratio differences against
/// `reference`, which must then be present.
pub fn dpo_loss(
    policy: &TinyLm,
    reference: Option<&TinyLm>,
    batch: &[PreferencePair],
    beta: f64,
    use_reference: bool,
) -> Result<f64> {
    let ref_lp = reference_log_probs(reference, batch, use_reference)?;
    let mut g = Graph::new(policy.params());
    let node = dpo_loss_node(&mut g, policy, batch, ref_lp.as_deref(), beta)?;
    Ok(g.scalar(node))
}

pub(crate) fn dpo_loss_with_grads(
    policy: &TinyLm,
    batch: &[PreferencePair],
    reference: Option<&[(f64, f64)]>,
    beta: f64,
) -> Result<(f64, Gradients)> {
    let mut g = Graph::new(policy.params());
    let node = dpo_loss_node(&mut g, policy, batch, reference, beta)?;
    Ok((g.scalar(node), g.backward(node)?))
}

fn reference_log_probs(
    reference: Option<&TinyLm>,
    batch: &[PreferencePair],
    use_reference: bool,
) -> Result<Option<Vec<(f64, f64)>>> {
    if !use_reference {
        return Ok(None);
    }
    let model = reference.ok_or(Error::MissingReference)?;
    preference_log_probs(model, batch).map(Some)
}

/// Mean of `β·(lp⁺ − lp⁻)` over `pairs`.
pub fn mean_margin(model: &TinyLm, pairs: &[PreferencePair], beta: f64) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("preference pairs"));
    }
    let lps = preference_log_probs(model, pairs)?;
    Ok(lps.iter().map(|(p, m)| beta * (p - m)).sum::<f64>() / lps.len() as f64)
}

/// Fraction of pairs with `lp⁺ > lp⁻`.
pub fn ranking_accuracy(model: &TinyLm, pairs: &[PreferencePair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("preference pairs"));
    }
    let lps = preference_log_probs(model, pairs)?;
    Ok(lps.iter().filter(|(p, m)| p > m).count() as f64 / lps.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpoReport {
    /// Mean margin over the whole set before the first update.
    pub initial_margin: f64,
    /// Mean batch margin seen during each epoch.
    pub epoch_margins: Vec<f64>,
    pub epoch_losses: Vec<f64>,
    /// Mean margin over the whole set after the last update.
    pub final_margin: f64,
}

/// Optimizes the preference loss from an SFT checkpoint.
pub fn train_dpo(
    checkpoint: ModelCheckpoint,
    records: &[PreferenceRecord],
    config: &DpoConfig,
) -> Result<(ModelCheckpoint, DpoReport)> {
    config.validate()?;
    if records.is_empty() {
        return Err(Error::EmptyInput("preference records"));
    }
    let ModelCheckpoint { mut model, tokenizer, meta: parent } = checkpoint;
    let pairs = encode_preferences(&tokenizer, records, model.config().token_capacity());
    let reference = if config.use_reference { Some(preference_log_probs(&model, &pairs)?) } else { None };
    let initial_margin = mean_margin(&model, &pairs, config.beta)?;

    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut rng = rng::substream(config.seed, rng::SHUFFLE);
    let mut state = AdamState::new(model.params());
    let (mut epoch_losses, mut epoch_margins) = (Vec::new(), Vec::new());
    let mut step = 0;

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut margin_sum, mut batches, mut seen) = (0.0, 0.0, 0, 0);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<PreferencePair> = chunk.iter().map(|&i| pairs[i].clone()).collect();
            let ref_batch: Option<Vec<(f64, f64)>> = reference.as_ref().map(|r| chunk.iter().map(|&i| r[i]).collect());
            let lps = preference_log_probs(&model, &batch)?;
            margin_sum += lps.iter().map(|(p, m)| config.beta * (p - m)).sum::<f64>();
            seen += batch.len();
            let (loss, grads) = dpo_loss_with_grads(&model, &batch, ref_batch.as_deref(), config.beta)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { step, loss });
            }
            adam_step(model.params_mut(), &grads, &mut state, config.lr, config.weight_decay)?;
            if !model.params().all_finite() {
                return Err(Error::Divergence { step, loss: f64::NAN });
            }
            loss_sum += loss;
            batches += 1;
            step += 1;
        }
        epoch_losses.push(loss_sum / batches as f64);
        epoch_margins.push(margin_sum / seen as f64);
    }

    let final_margin = mean_margin(&model, &pairs, config.beta)?;
    let meta = TrainingMeta {
        seed: config.seed,
        steps: parent.steps + step as u64,
        stage: if parent.stage.is_empty() { "dpo".into() } else { format!("{}+dpo", parent.stage) },
        epoch_losses: epoch_losses.clone(),
        epoch_margins: epoch_margins.clone(),
        provenance: parent.provenance,
    };
    let report = DpoReport { initial_margin, epoch_margins, epoch_losses, final_margin };
    Ok((ModelCheckpoint { model, tokenizer, meta }, report))
}
