//! TOML run configuration. Every section is optional; command-line flags
//! override whatever the file sets.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Result;
use finchat_core::corpus::SynthConfig;
use finchat_core::harness::HarnessConfig;
use finchat_core::knowledge::{FusionMode, DEFAULT_THRESHOLD};
use finchat_core::politeness::ClassifierConfig;
use finchat_core::{DpoConfig, ModelConfig, SamplerConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::failure::Failure;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub classifier: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub count: usize,
    pub min_turns: usize,
    pub max_turns: usize,
    pub grounding: f64,
    pub efair_rate: f64,
    /// Polite, neutral, impolite.
    pub politeness_weights: [f64; 3],
}

impl Default for SynthSection {
    fn default() -> Self {
        let d = SynthConfig::default();
        Self {
            count: d.count,
            min_turns: d.turns.0,
            max_turns: d.turns.1,
            grounding: d.grounding,
            efair_rate: d.efair_rate,
            politeness_weights: d.politeness_weights,
        }
    }
}

impl SynthSection {
    pub fn to_config(&self, threshold: f64, k: usize) -> SynthConfig {
        SynthConfig {
            count: self.count,
            turns: (self.min_turns, self.max_turns),
            grounding: self.grounding,
            efair_rate: self.efair_rate,
            politeness_weights: self.politeness_weights,
            threshold,
            k,
            ..SynthConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Retrieval {
    pub threshold: f64,
    pub k: usize,
    pub history_budget: usize,
    pub fusion: FusionMode,
}

impl Default for Retrieval {
    fn default() -> Self {
        let h = HarnessConfig::default();
        Self { threshold: DEFAULT_THRESHOLD, k: h.k, history_budget: h.history_budget, fusion: h.fusion }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Eval {
    pub generation_room: usize,
    pub max_test_samples: usize,
    pub max_vocab: usize,
}

impl Default for Eval {
    fn default() -> Self {
        let h = HarnessConfig::default();
        Self { generation_room: h.generation_room, max_test_samples: h.max_test_samples, max_vocab: h.max_vocab }
    }
}

/// The resolved configuration of one invocation; also what gets embedded in
/// artifact metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub paths: Paths,
    pub synth: SynthSection,
    pub retrieval: Retrieval,
    pub model: ModelConfig,
    pub sampler: SamplerConfig,
    pub sft: TrainConfig,
    pub dpo: DpoConfig,
    pub classifier: ClassifierConfig,
    pub classifier_train: TrainConfig,
    pub eval: Eval,
}

impl Default for RunConfig {
    fn default() -> Self {
        let h = HarnessConfig::default();
        Self {
            seed: None,
            paths: Paths::default(),
            synth: SynthSection::default(),
            retrieval: Retrieval::default(),
            model: h.model,
            sampler: h.sampler,
            sft: h.sft,
            dpo: h.dpo,
            classifier: h.classifier,
            classifier_train: h.classifier_train,
            eval: Eval::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::Config(format!("{}: {}", path.display(), e.message())).into())
    }

    /// Fixes the seed (flag first, then file) and propagates it to every
    /// stage; fails naming `--seed` when neither gives one.
    pub fn require_seed(&mut self, flag: Option<u64>) -> Result<u64> {
        let seed = flag.or(self.seed).ok_or(Failure::MissingFlag("--seed"))?;
        self.seed = Some(seed);
        self.sft.seed = seed;
        self.dpo.seed = seed;
        self.sampler.seed = seed;
        self.classifier_train.seed = seed;
        Ok(seed)
    }

    pub fn harness(&self) -> HarnessConfig {
        HarnessConfig {
            seed: self.seed.unwrap_or_default(),
            model: self.model.clone(),
            sft: self.sft.clone(),
            dpo: self.dpo.clone(),
            sampler: self.sampler.clone(),
            classifier: self.classifier.clone(),
            classifier_train: self.classifier_train.clone(),
            max_vocab: self.eval.max_vocab,
            k: self.retrieval.k,
            history_budget: self.retrieval.history_budget,
            fusion: self.retrieval.fusion,
            generation_room: self.eval.generation_room,
            max_test_samples: self.eval.max_test_samples,
        }
    }

    pub fn provenance(&self, command: &str) -> serde_json::Value {
        serde_json::json!({
            "tool": concat!("finchat ", env!("CARGO_PKG_VERSION")),
            "command": command,
            "seed": self.seed,
            "config": self,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_harness() {
        let c = RunConfig::default();
        assert_eq!(c.harness(), HarnessConfig::default());
    }

    #[test]
    fn partial_sections_fill_from_defaults() {
        let c: RunConfig = toml::from_str("seed = 3\n[model]\nd_model = 32\n[dpo]\nbeta = 0.5\n").unwrap();
        assert_eq!(c.seed, Some(3));
        assert_eq!(c.model.d_model, 32);
        assert_eq!(c.model.n_layers, RunConfig::default().model.n_layers);
        assert_eq!(c.dpo.beta, 0.5);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("[model]\nwidth = 3\n").is_err());
    }

    #[test]
    fn flag_seed_wins() {
        let mut c: RunConfig = toml::from_str("seed = 3").unwrap();
        assert_eq!(c.require_seed(Some(9)).unwrap(), 9);
        assert_eq!(c.sampler.seed, 9);
        let mut d = RunConfig::default();
        assert!(d.require_seed(None).is_err());
    }
}
