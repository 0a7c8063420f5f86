use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::prompt::{encode_example, PromptBuilder};
use crate::corpus::DialogueRecord;
use crate::error::{Error, Result};
use crate::rng;
use crate::tinylm::{adam_step, AdamState, ModelCheckpoint, Sequence, TinyLm, Tokenizer, TrainingMeta};

/// One supervised pair: model input text and the gold response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftExample {
    pub prompt: String,
    pub target: String,
    /// Mean fact embedding when prompts use prefix fusion.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knowledge: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 3, batch_size: 8, lr: 1e-4, weight_decay: 0.01, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("epochs and batch_size must be positive".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite() && self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::InvalidConfig("lr and weight_decay must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// One example per turn. Turn `i` sees turns `< i` of its dialogue as
/// history, trimmed to the builder's budget.
pub fn build_sft_examples(records: &[DialogueRecord], builder: &PromptBuilder<'_>) -> Result<Vec<SftExample>> {
    let mut out = Vec::new();
    for record in records {
        let mut history: Vec<(String, String)> = Vec::new();
        for turn in &record.turns {
            let (prompt, _) = builder.build(&history, &turn.user)?;
            out.push(SftExample {
                prompt: prompt.text,
                target: turn.bot.clone(),
                knowledge: prompt.knowledge.map(|k| k.into_values()),
            });
            history.push((turn.user.clone(), turn.bot.clone()));
        }
    }
    Ok(out)
}

pub fn encode_sft(tokenizer: &Tokenizer, examples: &[SftExample], capacity: usize) -> Vec<Sequence> {
    examples.iter().map(|e| encode_example(tokenizer, &e.prompt, &e.target, e.knowledge.clone(), capacity)).collect()
}

/// Teacher-forced cross-entropy training with Adam.
///
/// Every epoch visits the examples in an order drawn from the `shuffle`
/// substream. The returned checkpoint records the mean loss of each epoch.
pub fn train_sft(
    model: TinyLm,
    tokenizer: Tokenizer,
    examples: &[SftExample],
    config: &TrainConfig,
) -> Result<ModelCheckpoint> {
    train_sft_observed(model, tokenizer, examples, config, |_, _| {})
}

/// [`train_sft`] that reports `(step, batch loss)` after every update.
pub fn train_sft_observed(
    mut model: TinyLm,
    tokenizer: Tokenizer,
    examples: &[SftExample],
    config: &TrainConfig,
    mut observe: impl FnMut(usize, f64),
) -> Result<ModelCheckpoint> {
    config.validate()?;
    if examples.is_empty() {
        return Err(Error::EmptyInput("training examples"));
    }
    let sequences = encode_sft(&tokenizer, examples, model.config().token_capacity());
    let mut order: Vec<usize> = (0..sequences.len()).collect();
    let mut rng = rng::substream(config.seed, rng::SHUFFLE);
    let mut state = AdamState::new(model.params());
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut step = 0;

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<Sequence> = chunk.iter().map(|&i| sequences[i].clone()).collect();
            let (loss, grads) = model.loss_ce_with_grads(&batch)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { step, loss });
            }
            adam_step(model.params_mut(), &grads, &mut state, config.lr, config.weight_decay)?;
            if !model.params().all_finite() {
                return Err(Error::Divergence { step, loss: f64::NAN });
            }
            observe(step, loss);
            total += loss;
            batches += 1;
            step += 1;
        }
        epoch_losses.push(total / batches as f64);
    }

    let meta = TrainingMeta {
        seed: config.seed,
        steps: step as u64,
        stage: "sft".into(),
        epoch_losses,
        ..TrainingMeta::default()
    };
    Ok(ModelCheckpoint { model, tokenizer, meta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DomainTag, PolitenessLabel, RegionTag, Turn};
    use crate::tinylm::ModelConfig;
    use crate::training::Setting;

    fn record() -> DialogueRecord {
        DialogueRecord {
            id: "d".into(),
            domain: DomainTag::Tax,
            region: RegionTag::India,
            politeness: PolitenessLabel::Neutral,
            turns: vec![Turn::new("q one", "a one"), Turn::new("q two", "a two"), Turn::new("q three", "a three")],
            efair: None,
        }
    }

    fn tiny(tokenizer: &Tokenizer) -> TinyLm {
        let config = ModelConfig {
            d_model: 16,
            n_layers: 1,
            n_heads: 2,
            d_ff: 32,
            context_length: 32,
            vocab_size: tokenizer.vocab_size(),
            ..ModelConfig::default()
        };
        TinyLm::init(config, 3).unwrap()
    }

    #[test]
    fn one_example_per_turn_with_history() {
        let ex = build_sft_examples(&[record()], &PromptBuilder::new(Setting::Wc, None)).unwrap();
        assert_eq!(ex.len(), 3);
        assert_eq!(ex[0].prompt, "[KNOWLEDGE] [QUERY] q one [RESPONSE]");
        assert!(ex[2].prompt.starts_with("[USER] q one [BOT] a one [USER] q two [BOT] a two "));
        assert_eq!(ex[2].target, "a three");
    }

    #[test]
    fn zero_lr_leaves_parameters_untouched() {
        let ex = build_sft_examples(&[record()], &PromptBuilder::new(Setting::Wc, None)).unwrap();
        let tok = Tokenizer::build(ex.iter().flat_map(|e| [e.prompt.as_str(), e.target.as_str()]), 100);
        let model = tiny(&tok);
        let cfg = TrainConfig { lr: 0.0, weight_decay: 0.01, epochs: 2, batch_size: 2, seed: 1 };
        let out = train_sft(model.clone(), tok, &ex, &cfg).unwrap();
        assert_eq!(out.model.params(), model.params());
        assert_eq!(out.meta.steps, 4);
        assert_eq!(out.meta.epoch_losses.len(), 2);
    }

    #[test]
    fn empty_examples_are_an_error() {
        let tok = Tokenizer::build(["a"], 10);
        assert!(train_sft(tiny(&tok), tok, &[], &TrainConfig::default()).is_err());
    }
}
