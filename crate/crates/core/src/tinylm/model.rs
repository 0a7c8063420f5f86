use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::autograd::{Gradients, Graph, Matrix, NodeId, Parameters};
use crate::error::{Error, Result};
use crate::rng;

/// Hard ceiling on positions, matching the generation length cap.
pub const MAX_CONTEXT: usize = 1024;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub context_length: usize,
    pub vocab_size: usize,
    /// Reuse the token embedding matrix as the output projection.
    #[serde(default)]
    pub tie_embeddings: bool,
    /// Pseudo-token slots fed from a projected knowledge vector; 0 disables
    /// the projection entirely.
    #[serde(default)]
    pub n_prefix: usize,
    /// Width of the knowledge vector the projection consumes.
    #[serde(default = "default_knowledge_dim")]
    pub knowledge_dim: usize,
}

fn default_knowledge_dim() -> usize {
    crate::knowledge::DEFAULT_DIM
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_model: 128,
            n_layers: 2,
            n_heads: 4,
            d_ff: 512,
            context_length: 256,
            vocab_size: 0,
            tie_embeddings: false,
            n_prefix: 0,
            knowledge_dim: default_knowledge_dim(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if self.d_model == 0 || self.n_heads == 0 || self.d_ff == 0 || self.vocab_size == 0 {
            return fail(format!("zero-sized model dimension in {self:?}"));
        }
        if self.d_model % self.n_heads != 0 {
            return fail(format!("d_model {} not divisible by n_heads {}", self.d_model, self.n_heads));
        }
        if self.context_length == 0 || self.context_length > MAX_CONTEXT {
            return fail(format!("context_length {} outside 1..={MAX_CONTEXT}", self.context_length));
        }
        if self.n_prefix >= self.context_length {
            return fail(format!("n_prefix {} leaves no room in the context", self.n_prefix));
        }
        Ok(())
    }

    /// Positions left for tokens once knowledge slots are reserved.
    pub fn token_capacity(&self) -> usize {
        self.context_length - self.n_prefix
    }
}

/// One scoring unit: the model reads `prompt ++ completion` and is scored on
/// the completion tokens only.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub prompt: Vec<u32>,
    pub completion: Vec<u32>,
    /// Mean knowledge embedding for the prefix fusion mode.
    pub knowledge: Option<Vec<f64>>,
}

impl Sequence {
    pub fn new(prompt: Vec<u32>, completion: Vec<u32>) -> Self {
        Self { prompt, completion, knowledge: None }
    }

    pub fn ids(&self) -> Vec<u32> {
        let mut ids = self.prompt.clone();
        ids.extend_from_slice(&self.completion);
        ids
    }
}

/// Decoder-only transformer: learned absolute positions, pre-norm blocks,
/// GELU feed-forward, final layer norm, linear output head.
#[derive(Debug, Clone, PartialEq)]
pub struct TinyLm {
    config: ModelConfig,
    params: Parameters,
}

impl TinyLm {
    /// Fresh model with `N(0, 0.02²)` weights drawn from the `init` substream.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = rng::substream(seed, rng::INIT);
        let normal = Normal::new(0.0, 0.02).expect("valid std");
        let mut randn =
            |rows: usize, cols: usize| Matrix::from_shape_simple_fn((rows, cols), || normal.sample(&mut rng));
        let (d, v, f) = (config.d_model, config.vocab_size, config.d_ff);

        let mut p = Parameters::new();
        p.push("tok_emb", randn(v, d));
        p.push("pos_emb", randn(config.context_length, d));
        for l in 0..config.n_layers {
            p.push(format!("layers.{l}.ln1.gain"), Matrix::ones((1, d)));
            p.push(format!("layers.{l}.ln1.bias"), Matrix::zeros((1, d)));
            for w in ["wq", "wk", "wv", "wo"] {
                p.push(format!("layers.{l}.attn.{w}"), randn(d, d));
            }
            p.push(format!("layers.{l}.ln2.gain"), Matrix::ones((1, d)));
            p.push(format!("layers.{l}.ln2.bias"), Matrix::zeros((1, d)));
            p.push(format!("layers.{l}.ff.w1"), randn(d, f));
            p.push(format!("layers.{l}.ff.b1"), Matrix::zeros((1, f)));
            p.push(format!("layers.{l}.ff.w2"), randn(f, d));
            p.push(format!("layers.{l}.ff.b2"), Matrix::zeros((1, d)));
        }
        p.push("ln_f.gain", Matrix::ones((1, d)));
        p.push("ln_f.bias", Matrix::zeros((1, d)));
        if !config.tie_embeddings {
            p.push("lm_head", randn(d, v));
        }
        if config.n_prefix > 0 {
            p.push("knowledge_proj", randn(config.knowledge_dim, config.n_prefix * d));
        }
        Ok(Self { config, params: p })
    }

    /// Assembles a model from stored parameters, checking every shape.
    pub fn from_parts(config: ModelConfig, params: Parameters) -> Result<Self> {
        config.validate()?;
        let expected = Self::init(config.clone(), 0)?.params;
        if !expected.same_layout(&params) {
            return Err(Error::ShapeMismatch("parameters do not match the model config".into()));
        }
        if !params.all_finite() {
            return Err(Error::ShapeMismatch("non-finite parameter".into()));
        }
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &Parameters {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Parameters {
        &mut self.params
    }

    pub fn into_params(self) -> Parameters {
        self.params
    }

    fn check_len(&self, tokens: usize) -> Result<()> {
        let len = tokens + self.config.n_prefix;
        if len > self.config.context_length {
            return Err(Error::SequenceTooLong { len, max: self.config.context_length });
        }
        Ok(())
    }

    /// Records the forward pass on `g` and returns the `positions × vocab`
    /// logits node. With `n_prefix > 0` the first `n_prefix` rows belong to
    /// the knowledge slots and are dropped from the output.
    pub fn logits_node(&self, g: &mut Graph<'_>, ids: &[u32], knowledge: Option<&[f64]>) -> Result<NodeId> {
        self.check_len(ids.len())?;
        if let Some(&bad) = ids.iter().find(|&&id| id as usize >= self.config.vocab_size) {
            return Err(Error::ShapeMismatch(format!("token id {bad} outside vocabulary")));
        }
        let cfg = &self.config;
        let d = cfg.d_model;
        let n_prefix = cfg.n_prefix;

        let tok_table = g.param_by_name("tok_emb");
        let pos_table = g.param_by_name("pos_emb");
        let idx: Vec<usize> = ids.iter().map(|&i| i as usize).collect();
        let mut x = g.gather(tok_table, &idx);

        if n_prefix > 0 {
            let kv = match knowledge {
                Some(k) if k.len() != cfg.knowledge_dim => {
                    return Err(Error::DimensionMismatch { left: k.len(), right: cfg.knowledge_dim })
                }
                Some(k) => Matrix::from_shape_vec((1, k.len()), k.to_vec()).expect("row"),
                None => Matrix::zeros((1, cfg.knowledge_dim)),
            };
            let kn = g.constant(kv);
            let proj = g.param_by_name("knowledge_proj");
            let flat = g.matmul(kn, proj);
            let prefix = g.reshape(flat, n_prefix, d);
            x = g.concat_rows(prefix, x);
        }
        let positions: Vec<usize> = (0..n_prefix + ids.len()).collect();
        let pos = g.gather(pos_table, &positions);
        x = g.add(x, pos);

        for l in 0..cfg.n_layers {
            let p = |name: &str| format!("layers.{l}.{name}");
            let (gain, bias) = (g.param_by_name(&p("ln1.gain")), g.param_by_name(&p("ln1.bias")));
            let h = g.layer_norm(x, gain, bias);
            let (wq, wk, wv, wo) = (
                g.param_by_name(&p("attn.wq")),
                g.param_by_name(&p("attn.wk")),
                g.param_by_name(&p("attn.wv")),
                g.param_by_name(&p("attn.wo")),
            );
            let q = g.matmul(h, wq);
            let k = g.matmul(h, wk);
            let v = g.matmul(h, wv);
            let a = g.causal_attention(q, k, v, cfg.n_heads);
            let a = g.matmul(a, wo);
            x = g.add(x, a);

            let (gain, bias) = (g.param_by_name(&p("ln2.gain")), g.param_by_name(&p("ln2.bias")));
            let h = g.layer_norm(x, gain, bias);
            let (w1, b1, w2, b2) = (
                g.param_by_name(&p("ff.w1")),
                g.param_by_name(&p("ff.b1")),
                g.param_by_name(&p("ff.w2")),
                g.param_by_name(&p("ff.b2")),
            );
            let f = g.matmul(h, w1);
            let f = g.add_row(f, b1);
            let f = g.gelu(f);
            let f = g.matmul(f, w2);
            let f = g.add_row(f, b2);
            x = g.add(x, f);
        }
        let (gain, bias) = (g.param_by_name("ln_f.gain"), g.param_by_name("ln_f.bias"));
        let mut h = g.layer_norm(x, gain, bias);
        if n_prefix > 0 {
            // Drop knowledge rows so row i always predicts token i + 1.
            let rows = g.value(h).nrows();
            let keep: Vec<usize> = (n_prefix..rows).collect();
            h = g.gather(h, &keep);
        }
        let logits = if cfg.tie_embeddings {
            g.matmul_t(h, tok_table)
        } else {
            let head = g.param_by_name("lm_head");
            g.matmul(h, head)
        };
        Ok(logits)
    }

    /// Next-token logits at every position.
    pub fn forward(&self, ids: &[u32]) -> Result<Matrix> {
        self.forward_with_knowledge(ids, None)
    }

    pub fn forward_with_knowledge(&self, ids: &[u32], knowledge: Option<&[f64]>) -> Result<Matrix> {
        let mut g = Graph::new(&self.params);
        let logits = self.logits_node(&mut g, ids, knowledge)?;
        Ok(g.value(logits).clone())
    }

    /// Records `Σ log P(completion | prompt)` as a `1×1` node.
    pub fn log_prob_node(&self, g: &mut Graph<'_>, seq: &Sequence) -> Result<NodeId> {
        if seq.prompt.is_empty() {
            return Err(Error::InvalidConfig("prompt must hold at least one token (BOS)".into()));
        }
        let ids = seq.ids();
        let logits = self.logits_node(g, &ids, seq.knowledge.as_deref())?;
        let start = seq.prompt.len();
        let picks: Vec<(usize, usize)> =
            seq.completion.iter().enumerate().map(|(i, &tok)| (start + i - 1, tok as usize)).collect();
        Ok(g.pick_log_probs(logits, &picks))
    }

    /// Sum over completion positions of the log-probability of the next
    /// token. Prompt positions are not scored.
    pub fn log_prob(&self, prompt: &[u32], completion: &[u32]) -> Result<f64> {
        self.sequence_log_prob(&Sequence::new(prompt.to_vec(), completion.to_vec()))
    }

    pub fn sequence_log_prob(&self, seq: &Sequence) -> Result<f64> {
        let mut g = Graph::new(&self.params);
        let node = self.log_prob_node(&mut g, seq)?;
        Ok(g.scalar(node))
    }

    /// Records the mean completion-token negative log-likelihood.
    pub fn loss_ce_node(&self, g: &mut Graph<'_>, batch: &[Sequence]) -> Result<NodeId> {
        if batch.is_empty() {
            return Err(Error::EmptyInput("batch"));
        }
        let tokens: usize = batch.iter().map(|s| s.completion.len()).sum();
        if tokens == 0 {
            return Err(Error::EmptyInput("completion tokens in batch"));
        }
        let terms = batch.iter().map(|s| self.log_prob_node(g, s)).collect::<Result<Vec<_>>>()?;
        let total = g.sum(&terms);
        Ok(g.scale(total, -1.0 / tokens as f64))
    }

    pub fn loss_ce(&self, batch: &[Sequence]) -> Result<f64> {
        let mut g = Graph::new(&self.params);
        let node = self.loss_ce_node(&mut g, batch)?;
        Ok(g.scalar(node))
    }

    pub fn loss_ce_with_grads(&self, batch: &[Sequence]) -> Result<(f64, Gradients)> {
        let mut g = Graph::new(&self.params);
        let node = self.loss_ce_node(&mut g, batch)?;
        Ok((g.scalar(node), g.backward(node)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny_config(vocab: usize) -> ModelConfig {
        ModelConfig {
            d_model: 8,
            n_layers: 2,
            n_heads: 2,
            d_ff: 16,
            context_length: 12,
            vocab_size: vocab,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        let mut c = tiny_config(10);
        assert!(c.validate().is_ok());
        c.n_heads = 3;
        assert!(c.validate().is_err());
        c.n_heads = 2;
        c.context_length = 2048;
        assert!(c.validate().is_err());
    }

    #[test]
    fn rejects_overlong_sequences() {
        let m = TinyLm::init(tiny_config(10), 1).unwrap();
        let ids = vec![1u32; 13];
        assert!(matches!(m.forward(&ids), Err(Error::SequenceTooLong { len: 13, max: 12 })));
    }

    #[test]
    fn zero_output_projection_gives_uniform_distribution() {
        let mut m = TinyLm::init(tiny_config(10), 1).unwrap();
        m.params_mut().get_mut("lm_head").unwrap().fill(0.0);
        let logits = m.forward(&[1, 4, 5]).unwrap();
        for row in logits.rows() {
            let p = crate::tinylm::autograd::softmax(row.as_slice().unwrap());
            assert!(p.iter().all(|&x| (x - 0.1).abs() < 1e-15));
        }
    }

    #[test]
    fn empty_completion_scores_zero() {
        let m = TinyLm::init(tiny_config(10), 1).unwrap();
        assert_eq!(m.log_prob(&[1, 4], &[]).unwrap(), 0.0);
    }

    #[test]
    fn single_token_vocabulary_is_a_delta() {
        let m = TinyLm::init(tiny_config(1), 1).unwrap();
        assert_eq!(m.log_prob(&[0, 0], &[0, 0, 0]).unwrap(), 0.0);
    }

    #[test]
    fn uniform_model_loss_is_ln_vocab() {
        let mut m = TinyLm::init(tiny_config(10), 1).unwrap();
        m.params_mut().get_mut("lm_head").unwrap().fill(0.0);
        let batch = vec![Sequence::new(vec![1, 4], vec![5, 6, 2]), Sequence::new(vec![1], vec![7])];
        assert!((m.loss_ce(&batch).unwrap() - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn empty_batch_is_an_error() {
        let m = TinyLm::init(tiny_config(10), 1).unwrap();
        assert!(matches!(m.loss_ce(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn unused_knowledge_projection_gets_zero_gradient_without_prefix() {
        let m = TinyLm::init(tiny_config(10), 3).unwrap();
        let (_, grads) = m.loss_ce_with_grads(&[Sequence::new(vec![1, 4], vec![5])]).unwrap();
        // pos_emb rows beyond the sequence are off-path.
        let pos = grads.get("pos_emb").unwrap();
        assert!(pos.row(5).iter().all(|&v| v == 0.0));
        assert!(grads.all_finite());
    }

    #[test]
    fn from_parts_checks_layout() {
        let m = TinyLm::init(tiny_config(10), 3).unwrap();
        let mut other = tiny_config(10);
        other.d_ff = 32;
        assert!(TinyLm::from_parts(other, m.params().clone()).is_err());
        assert!(TinyLm::from_parts(tiny_config(10), m.params().clone()).is_ok());
    }
}
