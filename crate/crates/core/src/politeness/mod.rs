//! Three-class politeness classifier.
//!
//! A small trainable encoder mean-pools token embeddings and applies one
//! `tanh` layer to get `r`; the head computes `o = W_p·r + b_p` with
//! `W_p ∈ R^{3×d}` and a softmax gives the class probabilities. Class order,
//! which is also the tie-break order, is Polite, Neutral, Impolite.

use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::{synthesize_corpus, DialogueRecord, PolitenessLabel, SynthConfig};
use crate::error::{Error, Result};
use crate::rng;
use crate::tinylm::autograd::{softmax, NodeId};
use crate::tinylm::checkpoint;
use crate::tinylm::{adam_step, AdamState, Graph, Matrix, Parameters, Tokenizer, TrainingMeta};
use crate::training::TrainConfig;

pub const NUM_CLASSES: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierConfig {
    pub d_embed: usize,
    /// Width `d` of the pooled representation `r`.
    pub d_hidden: usize,
    pub vocab_size: usize,
    pub max_vocab: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self { d_embed: 32, d_hidden: 32, vocab_size: 0, max_vocab: 4096 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolitenessVerdict {
    pub label: PolitenessLabel,
    /// In Polite, Neutral, Impolite order.
    pub probabilities: [f64; NUM_CLASSES],
}

/// First index holding the maximum.
fn first_argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate().skip(1) {
        if v > p[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolitenessClassifier {
    pub config: ClassifierConfig,
    pub tokenizer: Tokenizer,
    pub params: Parameters,
    pub meta: TrainingMeta,
}

impl PolitenessClassifier {
    pub const KIND: &'static str = "politeness";

    /// Random encoder (`N(0, 0.1²)`), zero head.
    pub fn init(mut config: ClassifierConfig, tokenizer: Tokenizer, seed: u64) -> Result<Self> {
        config.vocab_size = tokenizer.vocab_size();
        if config.d_embed == 0 || config.d_hidden == 0 {
            return Err(Error::InvalidConfig("classifier dimensions must be positive".into()));
        }
        let mut rng = rng::substream(seed, rng::CLASSIFIER);
        let normal = Normal::new(0.0, 0.1).expect("valid std");
        let mut randn = |r: usize, c: usize| Matrix::from_shape_simple_fn((r, c), || normal.sample(&mut rng));
        let mut params = Parameters::new();
        params.push("emb", randn(config.vocab_size, config.d_embed));
        params.push("enc.w", randn(config.d_embed, config.d_hidden));
        params.push("enc.b", Matrix::zeros((1, config.d_hidden)));
        params.push("head.w", Matrix::zeros((NUM_CLASSES, config.d_hidden)));
        params.push("head.b", Matrix::zeros((1, NUM_CLASSES)));
        let meta = TrainingMeta { seed, stage: "init".into(), ..TrainingMeta::default() };
        Ok(Self { config, tokenizer, params, meta })
    }

    /// The `1×3` logit row `o` for `text`.
    pub fn logits_node(&self, g: &mut Graph<'_>, text: &str) -> NodeId {
        let ids: Vec<usize> = self.tokenizer.encode(text).into_iter().map(|i| i as usize).collect();
        let pooled = if ids.is_empty() {
            g.constant(Matrix::zeros((1, self.config.d_embed)))
        } else {
            let emb = g.param_by_name("emb");
            let rows = g.gather(emb, &ids);
            g.mean_rows(rows)
        };
        let w = g.param_by_name("enc.w");
        let b = g.param_by_name("enc.b");
        let h = g.matmul(pooled, w);
        let h = g.add_row(h, b);
        let r = g.tanh(h);
        let wp = g.param_by_name("head.w");
        let bp = g.param_by_name("head.b");
        let o = g.matmul_t(r, wp);
        g.add_row(o, bp)
    }

    pub fn logits(&self, text: &str) -> [f64; NUM_CLASSES] {
        let mut g = Graph::new(&self.params);
        let o = self.logits_node(&mut g, text);
        let v = g.value(o);
        [v[[0, 0]], v[[0, 1]], v[[0, 2]]]
    }

    pub fn classify(&self, text: &str) -> PolitenessVerdict {
        let p = softmax(&self.logits(text));
        let probabilities = [p[0], p[1], p[2]];
        let label = PolitenessLabel::from_index(first_argmax(&probabilities)).expect("three classes");
        PolitenessVerdict { label, probabilities }
    }

    /// Mean cross-entropy over `batch`, recorded on `g`.
    pub fn loss_node(&self, g: &mut Graph<'_>, batch: &[(String, PolitenessLabel)]) -> Result<NodeId> {
        if batch.is_empty() {
            return Err(Error::EmptyInput("classifier batch"));
        }
        let terms: Vec<NodeId> = batch
            .iter()
            .map(|(text, label)| {
                let o = self.logits_node(g, text);
                g.pick_log_probs(o, &[(0, label.index())])
            })
            .collect();
        let total = g.sum(&terms);
        Ok(g.scale(total, -1.0 / batch.len() as f64))
    }

    pub fn loss(&self, batch: &[(String, PolitenessLabel)]) -> Result<f64> {
        let mut g = Graph::new(&self.params);
        let node = self.loss_node(&mut g, batch)?;
        Ok(g.scalar(node))
    }

    pub fn accuracy(&self, data: &[(String, PolitenessLabel)]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::EmptyInput("labelled utterances"));
        }
        let hits = data.iter().filter(|(t, l)| self.classify(t).label == *l).count();
        Ok(hits as f64 / data.len() as f64)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        checkpoint::save(dir, Self::KIND, &self.config, &self.tokenizer, &self.meta, &self.params)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let (config, tokenizer, meta, params): (ClassifierConfig, _, _, _) = checkpoint::load(dir, Self::KIND)?;
        let expected = Self::init(config.clone(), tokenizer.clone(), 0)?;
        if !expected.params.same_layout(&params) || expected.config != config {
            return Err(Error::Checkpoint("classifier parameters do not match its config".into()));
        }
        Ok(Self { config, tokenizer, params, meta })
    }

    pub fn digest(&self) -> String {
        checkpoint::params_digest(&self.params)
    }
}

/// Fits a classifier on labelled utterances. Every class needs at least one
/// example; the vocabulary is built from the training texts.
pub fn train_classifier(
    data: &[(String, PolitenessLabel)],
    model: ClassifierConfig,
    config: &TrainConfig,
) -> Result<PolitenessClassifier> {
    config.validate()?;
    for label in PolitenessLabel::ALL {
        if !data.iter().any(|(_, l)| *l == label) {
            return Err(Error::MissingClass(label.to_string()));
        }
    }
    let tokenizer = Tokenizer::build(data.iter().map(|(t, _)| t.as_str()), model.max_vocab);
    let mut clf = PolitenessClassifier::init(model, tokenizer, config.seed)?;
    let mut state = AdamState::new(&clf.params);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = rng::substream(config.seed, rng::SHUFFLE);
    let mut epoch_losses = Vec::new();
    let mut step = 0usize;
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let (mut total, mut batches) = (0.0, 0);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(String, PolitenessLabel)> = chunk.iter().map(|&i| data[i].clone()).collect();
            let (loss, grads) = {
                let mut g = Graph::new(&clf.params);
                let node = clf.loss_node(&mut g, &batch)?;
                (g.scalar(node), g.backward(node)?)
            };
            if !loss.is_finite() {
                return Err(Error::Divergence { step, loss });
            }
            adam_step(&mut clf.params, &grads, &mut state, config.lr, config.weight_decay)?;
            total += loss;
            batches += 1;
            step += 1;
        }
        epoch_losses.push(total / batches as f64);
    }
    clf.meta = TrainingMeta {
        seed: config.seed,
        steps: step as u64,
        stage: "politeness".into(),
        epoch_losses,
        ..TrainingMeta::default()
    };
    Ok(clf)
}

/// `100 · (#Polite verdicts) / N`.
pub fn politeness_rate(classifier: &PolitenessClassifier, responses: &[String]) -> Result<f64> {
    if responses.is_empty() {
        return Err(Error::EmptyInput("responses"));
    }
    let polite = responses.iter().filter(|r| classifier.classify(r).label == PolitenessLabel::Polite).count();
    Ok(100.0 * polite as f64 / responses.len() as f64)
}

/// Bot utterances labelled with their dialogue's politeness.
pub fn labelled_utterances(records: &[DialogueRecord]) -> Vec<(String, PolitenessLabel)> {
    records.iter().flat_map(|r| r.turns.iter().map(move |t| (t.bot.clone(), r.politeness))).collect()
}

/// Template-generated polite, neutral and impolite responses in equal
/// proportion.
pub fn synth_politeness_fixture(count: usize, seed: u64) -> Result<Vec<(String, PolitenessLabel)>> {
    let config = SynthConfig { count, politeness_weights: [1.0, 1.0, 1.0], ..SynthConfig::default() };
    Ok(labelled_utterances(&synthesize_corpus(&config, seed)?))
}
