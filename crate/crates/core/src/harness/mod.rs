//! Four-way ablation: with or without retrieved knowledge, each with or
//! without a preference-optimization stage after fine-tuning.
//!
//! All four settings share the test split, the seed, the sampler and the
//! politeness classifier; only the training recipe differs. The DPO settings
//! start from the checkpoint of the matching fine-tuned setting.

mod scorecard;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::corpus::DialogueRecord;
use crate::error::{Error, Result};
use crate::knowledge::{AugmentedPrompt, FusionMode, KnowledgeIndex, DEFAULT_K};
use crate::metrics::{aggregate, score_pair, MetricReport, SampleScores, TABLE_COLUMNS};
use crate::politeness::{
    labelled_utterances, politeness_rate, train_classifier, ClassifierConfig, PolitenessClassifier,
};
use crate::rng;
use crate::tinylm::checkpoint::sha256_hex;
use crate::tinylm::tokenizer::BOS;
use crate::tinylm::{ModelCheckpoint, ModelConfig, Sampler, SamplerConfig, TinyLm};
use crate::training::{
    build_preference_set, build_sft_examples, build_tokenizer, encode_preferences, ranking_accuracy, train_dpo,
    train_sft, DpoConfig, DpoReport, PreferenceRecord, PromptBuilder, Setting, TrainConfig,
};

pub use scorecard::{export_scorecards, load_scorecards, mean_ratings, Ratings, Scorecard, RATING_CRITERIA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationSetting {
    Wc,
    Context,
    DpoWc,
    DpoContext,
}

impl AblationSetting {
    pub const ALL: [AblationSetting; 4] =
        [AblationSetting::Wc, AblationSetting::Context, AblationSetting::DpoWc, AblationSetting::DpoContext];

    pub fn base(self) -> Setting {
        match self {
            AblationSetting::Wc | AblationSetting::DpoWc => Setting::Wc,
            AblationSetting::Context | AblationSetting::DpoContext => Setting::Context,
        }
    }

    pub fn uses_dpo(self) -> bool {
        matches!(self, AblationSetting::DpoWc | AblationSetting::DpoContext)
    }

    pub fn slug(self) -> &'static str {
        match self {
            AblationSetting::Wc => "wc",
            AblationSetting::Context => "context",
            AblationSetting::DpoWc => "dpo_wc",
            AblationSetting::DpoContext => "dpo_context",
        }
    }
}

impl fmt::Display for AblationSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AblationSetting::Wc => "WC",
            AblationSetting::Context => "Context",
            AblationSetting::DpoWc => "DPO+WC",
            AblationSetting::DpoContext => "DPO+Context",
        })
    }
}

impl FromStr for AblationSetting {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let norm = s.to_ascii_lowercase().replace(['+', '-'], "_");
        Self::ALL.into_iter().find(|a| a.slug() == norm).ok_or_else(|| format!("unknown ablation setting {s:?}"))
    }
}

/// Every knob of an ablation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarnessConfig {
    pub seed: u64,
    /// `vocab_size` is filled in from the training corpus.
    pub model: ModelConfig,
    pub sft: TrainConfig,
    pub dpo: DpoConfig,
    pub sampler: SamplerConfig,
    pub classifier: ClassifierConfig,
    pub classifier_train: TrainConfig,
    pub max_vocab: usize,
    pub k: usize,
    pub history_budget: usize,
    pub fusion: FusionMode,
    /// Positions kept free for generation when a prompt is truncated.
    pub generation_room: usize,
    /// Score at most this many test turns; 0 means all.
    pub max_test_samples: usize,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            model: ModelConfig {
                d_model: 64,
                n_layers: 2,
                n_heads: 4,
                d_ff: 128,
                context_length: 160,
                ..ModelConfig::default()
            },
            sft: TrainConfig { epochs: 8, batch_size: 8, lr: 2e-3, weight_decay: 0.01, seed: 0 },
            dpo: DpoConfig {
                beta: 0.1,
                use_reference: false,
                epochs: 2,
                batch_size: 8,
                lr: 1e-4,
                weight_decay: 0.01,
                seed: 0,
            },
            sampler: SamplerConfig { max_target_length: 64, ..SamplerConfig::default() },
            classifier: ClassifierConfig::default(),
            classifier_train: TrainConfig { epochs: 6, batch_size: 16, lr: 1e-2, weight_decay: 0.0, seed: 0 },
            max_vocab: 4096,
            k: DEFAULT_K,
            history_budget: 40,
            fusion: FusionMode::Textual,
            generation_room: 64,
            max_test_samples: 0,
        }
    }
}

impl HarnessConfig {
    /// Propagates the root seed to every stage.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.sft.seed = seed;
        self.dpo.seed = seed;
        self.sampler.seed = seed;
        self.classifier_train.seed = seed;
        self
    }

    /// Hash of everything that must agree across the four settings.
    pub fn controlled_hash(&self, test: &[DialogueRecord]) -> String {
        let ids: Vec<&str> = test.iter().map(|r| r.id.as_str()).collect();
        let value = serde_json::json!({ "config": self, "test_ids": ids });
        sha256_hex(value.to_string().as_bytes())
    }
}

/// One generated response with its inputs and scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub turn: usize,
    pub prompt: String,
    pub gold: String,
    pub generated: String,
    pub facts: Vec<String>,
    pub scores: SampleScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpoDiagnostics {
    pub train: DpoReport,
    pub preference_count: usize,
    /// Ranking accuracy and mean margin on preferences built from the test split.
    pub heldout_accuracy_before: f64,
    pub heldout_accuracy_after: f64,
    pub heldout_margin_before: f64,
    pub heldout_margin_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub setting: AblationSetting,
    pub report: MetricReport,
    pub checkpoint_digest: String,
    pub seed: u64,
    pub config_hash: String,
    pub samples: Vec<SampleRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dpo: Option<DpoDiagnostics>,
    /// Kept out of the serialized record so reruns stay byte-identical.
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

/// Corpus splits and index shared by all settings.
#[derive(Debug, Clone)]
pub struct AblationInputs {
    pub train: Vec<DialogueRecord>,
    pub test: Vec<DialogueRecord>,
    pub index: KnowledgeIndex,
}

/// Shared, setting-independent state: tokenizer-sized model config and the
/// politeness classifier.
pub struct Harness<'a> {
    pub inputs: &'a AblationInputs,
    pub config: HarnessConfig,
    pub classifier: PolitenessClassifier,
    model_config: ModelConfig,
    tokenizer: crate::tinylm::Tokenizer,
}

impl<'a> Harness<'a> {
    pub fn new(inputs: &'a AblationInputs, config: HarnessConfig) -> Result<Self> {
        if inputs.train.is_empty() || inputs.test.is_empty() {
            return Err(Error::EmptyInput("train or test split"));
        }
        let triples: Vec<_> = inputs.index.entries.iter().map(|e| e.triple.clone()).collect();
        let tokenizer = build_tokenizer(&inputs.train, &triples, config.max_vocab);
        let model_config = ModelConfig { vocab_size: tokenizer.vocab_size(), ..config.model.clone() };
        model_config.validate()?;
        let classifier =
            train_classifier(&labelled_utterances(&inputs.train), config.classifier.clone(), &config.classifier_train)?;
        Ok(Self { inputs, config, classifier, model_config, tokenizer })
    }

    pub fn builder(&self, setting: Setting) -> PromptBuilder<'a> {
        let mut b = PromptBuilder::new(setting, Some(&self.inputs.index))
            .with_history_budget(self.config.history_budget)
            .with_fusion(self.config.fusion);
        b.k = self.config.k;
        b
    }

    /// Fine-tunes a fresh model on the training split.
    pub fn train_sft(&self, setting: Setting) -> Result<ModelCheckpoint> {
        let examples = build_sft_examples(&self.inputs.train, &self.builder(setting))?;
        let model = TinyLm::init(self.model_config.clone(), self.config.seed)?;
        train_sft(model, self.tokenizer.clone(), &examples, &self.config.sft)
    }

    pub fn preferences(
        &self,
        records: &[DialogueRecord],
        policy: &ModelCheckpoint,
        setting: Setting,
    ) -> Result<Vec<PreferenceRecord>> {
        build_preference_set(records, policy, &self.builder(setting), self.config.seed)
    }

    /// Preference stage on top of `sft`, with held-out diagnostics from
    /// preferences built on the test split.
    pub fn train_dpo(&self, sft: &ModelCheckpoint, setting: Setting) -> Result<(ModelCheckpoint, DpoDiagnostics)> {
        let prefs = self.preferences(&self.inputs.train, sft, setting)?;
        let heldout = self.preferences(&self.inputs.test, sft, setting)?;
        let capacity = sft.model.config().token_capacity();
        let heldout_pairs = encode_preferences(&sft.tokenizer, &heldout, capacity);
        let beta = self.config.dpo.beta;
        let (acc0, m0) = if heldout_pairs.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            (
                ranking_accuracy(&sft.model, &heldout_pairs)?,
                crate::training::mean_margin(&sft.model, &heldout_pairs, beta)?,
            )
        };
        let (tuned, report) = train_dpo(sft.clone(), &prefs, &self.config.dpo)?;
        let (acc1, m1) = if heldout_pairs.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            (
                ranking_accuracy(&tuned.model, &heldout_pairs)?,
                crate::training::mean_margin(&tuned.model, &heldout_pairs, beta)?,
            )
        };
        let diag = DpoDiagnostics {
            train: report,
            preference_count: prefs.len(),
            heldout_accuracy_before: acc0,
            heldout_accuracy_after: acc1,
            heldout_margin_before: m0,
            heldout_margin_after: m1,
        };
        Ok((tuned, diag))
    }

    /// Generates a response for every test turn (gold history) and scores it.
    pub fn evaluate(
        &self,
        checkpoint: &ModelCheckpoint,
        setting: AblationSetting,
    ) -> Result<(MetricReport, Vec<SampleRecord>)> {
        let builder = self.builder(setting.base());
        let mut samples = Vec::new();
        'outer: for record in &self.inputs.test {
            let mut history: Vec<(String, String)> = Vec::new();
            for (t, turn) in record.turns.iter().enumerate() {
                if self.config.max_test_samples > 0 && samples.len() >= self.config.max_test_samples {
                    break 'outer;
                }
                let (prompt, facts) = builder.build(&history, &turn.user)?;
                let mut sampler = Sampler::new(SamplerConfig {
                    seed: rng::derive_seed(self.config.sampler.seed, &format!("{}#{t}", record.id)),
                    ..self.config.sampler.clone()
                })?;
                let generated = generate_reply(checkpoint, &prompt, &mut sampler, self.config.generation_room)?;
                let scores = score_pair(&generated, &turn.bot, &builder.embedder)?;
                samples.push(SampleRecord {
                    id: record.id.clone(),
                    turn: t,
                    prompt: prompt.text,
                    gold: turn.bot.clone(),
                    generated,
                    facts: facts.into_iter().map(|f| f.text).collect(),
                    scores,
                });
                history.push((turn.user.clone(), turn.bot.clone()));
            }
        }
        let responses: Vec<String> = samples.iter().map(|s| s.generated.clone()).collect();
        let rate = politeness_rate(&self.classifier, &responses)?;
        let rows: Vec<SampleScores> = samples.iter().map(|s| s.scores.clone()).collect();
        Ok((aggregate(&rows, Some(rate))?, samples))
    }

    fn result(
        &self,
        setting: AblationSetting,
        checkpoint: &ModelCheckpoint,
        dpo: Option<DpoDiagnostics>,
        started: Instant,
    ) -> Result<AblationResult> {
        let (report, samples) = self.evaluate(checkpoint, setting)?;
        Ok(AblationResult {
            setting,
            report,
            checkpoint_digest: checkpoint.digest(),
            seed: self.config.seed,
            config_hash: self.config.controlled_hash(&self.inputs.test),
            samples,
            dpo,
            wall_clock_secs: started.elapsed().as_secs_f64(),
        })
    }

    /// Runs one setting. DPO settings reuse `sft` when given (it must be the
    /// checkpoint of the matching base setting) and train it otherwise.
    pub fn run_setting(
        &self,
        setting: AblationSetting,
        sft: Option<&ModelCheckpoint>,
    ) -> Result<(AblationResult, ModelCheckpoint)> {
        let started = Instant::now();
        let owned;
        let base = match sft {
            Some(c) => c,
            None => {
                owned = self.train_sft(setting.base())?;
                &owned
            }
        };
        if setting.uses_dpo() {
            let (tuned, diag) = self.train_dpo(base, setting.base())?;
            let result = self.result(setting, &tuned, Some(diag), started)?;
            Ok((result, tuned))
        } else {
            Ok((self.result(setting, base, None, started)?, base.clone()))
        }
    }

    /// All four settings, pipelined: each DPO setting consumes its base
    /// setting's checkpoint.
    pub fn run_all(&self) -> Result<Vec<(AblationResult, ModelCheckpoint)>> {
        let mut out = Vec::with_capacity(4);
        let (wc, wc_ckpt) = self.run_setting(AblationSetting::Wc, None)?;
        let (ctx, ctx_ckpt) = self.run_setting(AblationSetting::Context, None)?;
        let dpo_wc = self.run_setting(AblationSetting::DpoWc, Some(&wc_ckpt))?;
        let dpo_ctx = self.run_setting(AblationSetting::DpoContext, Some(&ctx_ckpt))?;
        out.push((wc, wc_ckpt));
        out.push((ctx, ctx_ckpt));
        out.push(dpo_wc);
        out.push(dpo_ctx);
        Ok(out)
    }
}

/// Samples a response to `prompt`. The prompt is left-truncated so that at
/// least `room` positions stay free for the reply.
pub fn generate_reply(
    checkpoint: &ModelCheckpoint,
    prompt: &AugmentedPrompt,
    sampler: &mut Sampler,
    room: usize,
) -> Result<String> {
    let capacity = checkpoint.model.config().token_capacity();
    let room = room.min(capacity.saturating_sub(2));
    let body = checkpoint.tokenizer.encode(&prompt.text);
    let keep = capacity.saturating_sub(room + 1);
    let mut ids = vec![BOS];
    ids.extend_from_slice(&body[body.len().saturating_sub(keep)..]);
    let knowledge = prompt.knowledge.as_ref().map(|k| k.values().to_vec());
    let out = sampler.generate(&checkpoint.model, &ids, knowledge.as_deref())?;
    Ok(checkpoint.tokenizer.decode(&out))
}

/// Results in [`AblationSetting::ALL`] order, or the first absent setting.
fn ordered(results: &[AblationResult]) -> Result<[&AblationResult; 4]> {
    let find = |s: AblationSetting| {
        results.iter().find(|r| r.setting == s).ok_or_else(|| Error::MissingSetting(s.to_string()))
    };
    Ok([
        find(AblationSetting::Wc)?,
        find(AblationSetting::Context)?,
        find(AblationSetting::DpoWc)?,
        find(AblationSetting::DpoContext)?,
    ])
}

/// `mask[row][col]` marks the bolded cell of each column: the highest value,
/// first setting on ties. Missing values are never bold.
pub fn bold_mask(results: &[AblationResult]) -> Result<[[bool; 12]; 4]> {
    let rows = ordered(results)?;
    let cols: Vec<[Option<f64>; 12]> = rows.iter().map(|r| r.report.columns()).collect();
    let mut mask = [[false; 12]; 4];
    for c in 0..12 {
        let mut best: Option<(usize, f64)> = None;
        for (r, row) in cols.iter().enumerate() {
            if let Some(v) = row[c] {
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((r, v));
                }
            }
        }
        if let Some((r, _)) = best {
            mask[r][c] = true;
        }
    }
    Ok(mask)
}

/// Markdown table in the fixed column order, best value per column in bold.
pub fn ablation_table(results: &[AblationResult]) -> Result<String> {
    let rows = ordered(results)?;
    let mask = bold_mask(results)?;
    let mut out = format!("| Setting | {} |\n", TABLE_COLUMNS.join(" | "));
    out.push_str(&format!("|---|{}\n", "---:|".repeat(TABLE_COLUMNS.len())));
    for (r, result) in rows.iter().enumerate() {
        let cells: Vec<String> = result
            .report
            .columns()
            .iter()
            .enumerate()
            .map(|(c, v)| match v {
                None => "-".to_string(),
                Some(v) if mask[r][c] => format!("**{v:.2}**"),
                Some(v) => format!("{v:.2}"),
            })
            .collect();
        out.push_str(&format!("| {} | {} |\n", result.setting, cells.join(" | ")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn report(v: f64) -> MetricReport {
        MetricReport {
            r1: v,
            r2: v,
            rl: v,
            b1: v,
            b2: v,
            b3: v,
            b4: v,
            bsp: v,
            bsr: v,
            bsf1: v,
            politeness: Some(v),
            meteor: v,
            sample_count: 1,
        }
    }

    pub(crate) fn result(setting: AblationSetting, report: MetricReport) -> AblationResult {
        AblationResult {
            setting,
            report,
            checkpoint_digest: String::new(),
            seed: 0,
            config_hash: String::new(),
            samples: Vec::new(),
            dpo: None,
            wall_clock_secs: 0.0,
        }
    }

    #[test]
    fn ties_bold_the_first_setting() {
        let results: Vec<_> = AblationSetting::ALL.iter().rev().map(|&s| result(s, report(1.0))).collect();
        let mask = bold_mask(&results).unwrap();
        assert!(mask[0].iter().all(|&b| b));
        assert!(mask[1..].iter().all(|row| row.iter().all(|&b| !b)));
        let table = ablation_table(&results).unwrap();
        assert!(table.lines().nth(2).unwrap().starts_with("| WC | **1.00**"));
        assert_eq!(table.matches("**").count(), 24);
    }

    #[test]
    fn missing_setting_is_named() {
        let results: Vec<_> = AblationSetting::ALL[..3].iter().map(|&s| result(s, report(1.0))).collect();
        let err = ablation_table(&results).unwrap_err();
        assert!(matches!(err, Error::MissingSetting(ref s) if s == "DPO+Context"));
    }

    #[test]
    fn setting_names_parse() {
        for s in AblationSetting::ALL {
            assert_eq!(s.to_string().parse::<AblationSetting>().unwrap(), s);
            assert_eq!(s.slug().parse::<AblationSetting>().unwrap(), s);
        }
        assert_eq!(AblationSetting::DpoContext.base(), Setting::Context);
        assert!(AblationSetting::DpoWc.uses_dpo() && !AblationSetting::Wc.uses_dpo());
    }

    #[test]
    fn seed_reaches_every_stage() {
        let c = HarnessConfig::default().with_seed(42);
        assert_eq!((c.sft.seed, c.dpo.seed, c.sampler.seed, c.classifier_train.seed), (42, 42, 42, 42));
    }
}
