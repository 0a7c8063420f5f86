//! Temperature and top-k sampling for autoregressive generation.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::TinyLm;
use super::tokenizer::EOS;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub temperature: f64,
    pub top_k: usize,
    pub max_target_length: usize,
    pub do_sample: bool,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { temperature: 1.0, top_k: 5, max_target_length: 1024, do_sample: true, seed: 0 }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidConfig(format!("temperature {} must be > 0", self.temperature)));
        }
        if self.top_k == 0 {
            return Err(Error::InvalidConfig("top_k must be at least 1".into()));
        }
        Ok(())
    }
}

/// The `k` highest entries of `logits / temperature`, renormalized, as
/// `(token, probability)` pairs in descending order. Equal logits keep the
/// lower token id first.
pub fn top_k_distribution(logits: &[f64], temperature: f64, k: usize) -> Vec<(u32, f64)> {
    let mut order: Vec<usize> = (0..logits.len()).collect();
    order.sort_by(|&a, &b| logits[b].total_cmp(&logits[a]).then(a.cmp(&b)));
    order.truncate(k.max(1));
    let scaled: Vec<f64> = order.iter().map(|&i| logits[i] / temperature).collect();
    let probs = super::autograd::softmax(&scaled);
    order.into_iter().map(|i| i as u32).zip(probs).collect()
}

/// Index of the largest logit; the lowest index wins ties.
pub fn argmax(logits: &[f64]) -> u32 {
    let mut best = 0;
    for (i, &x) in logits.iter().enumerate() {
        if x > logits[best] {
            best = i;
        }
    }
    best as u32
}

/// A sampler owns its random stream; concurrent generation uses one per caller.
#[derive(Debug, Clone)]
pub struct Sampler {
    config: SamplerConfig,
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(config: SamplerConfig) -> Result<Self> {
        config.validate()?;
        let rng = rng::substream(config.seed, rng::SAMPLING);
        Ok(Self { config, rng })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    /// Changes the generation cap without touching the random stream.
    pub fn set_max_target_length(&mut self, n: usize) {
        self.config.max_target_length = n;
    }

    /// Picks the next token from one row of logits.
    pub fn next_token(&mut self, logits: &[f64]) -> u32 {
        if !self.config.do_sample {
            return argmax(logits);
        }
        let dist = top_k_distribution(logits, self.config.temperature, self.config.top_k);
        let u: f64 = self.rng.random();
        let mut acc = 0.0;
        for &(tok, p) in &dist {
            acc += p;
            if u < acc {
                return tok;
            }
        }
        dist.last().expect("non-empty distribution").0
    }

    /// Extends `prompt` until EOS, `max_target_length` new tokens, or the
    /// context is full. Returns the new tokens without the EOS.
    pub fn generate(&mut self, model: &TinyLm, prompt: &[u32], knowledge: Option<&[f64]>) -> Result<Vec<u32>> {
        let capacity = model.config().token_capacity();
        if prompt.len() > capacity {
            return Err(Error::SequenceTooLong { len: prompt.len(), max: capacity });
        }
        let mut ids = prompt.to_vec();
        let mut out = Vec::new();
        while out.len() < self.config.max_target_length && ids.len() < capacity {
            let logits = model.forward_with_knowledge(&ids, knowledge)?;
            let last = logits.row(logits.nrows() - 1);
            let next = self.next_token(last.as_slice().expect("contiguous row"));
            if next == EOS {
                break;
            }
            ids.push(next);
            out.push(next);
        }
        Ok(out)
    }
}

/// Convenience wrapper: one fresh sampler per call.
pub fn sample(model: &TinyLm, prompt: &[u32], config: &SamplerConfig) -> Result<Vec<u32>> {
    Sampler::new(config.clone())?.generate(model, prompt, None)
}
