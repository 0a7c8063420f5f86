//! A miniature end-to-end ablation: determinism, pipelining, scorecards and
//! the politeness classifier.

use std::fs;

use finchat_core::corpus::{split_corpus, synthesize_corpus, to_jsonl, SynthConfig};
use finchat_core::harness::{ablation_table, AblationInputs, AblationSetting, Harness, HarnessConfig};
use finchat_core::harness::{export_scorecards, load_scorecards, mean_ratings, Ratings};
use finchat_core::knowledge::{HashingEmbedder, KnowledgeIndex};
use finchat_core::politeness::{synth_politeness_fixture, train_classifier, ClassifierConfig};
use finchat_core::tinylm::ModelConfig;
use finchat_core::training::{draw_corruption_modes, Setting, TrainConfig};

fn inputs(seed: u64) -> AblationInputs {
    let synth = SynthConfig { count: 50, grounding: 1.0, ..Default::default() };
    let records = synthesize_corpus(&synth, seed).unwrap();
    let split = split_corpus(&records, (0.8, 0.1, 0.1), seed).unwrap();
    let index = KnowledgeIndex::build(&synth.triples(), &HashingEmbedder::default(), synth.threshold).unwrap();
    AblationInputs { train: split.train, test: split.test, index }
}

fn config(seed: u64) -> HarnessConfig {
    let mut c = HarnessConfig {
        model: ModelConfig {
            d_model: 16,
            n_layers: 1,
            n_heads: 2,
            d_ff: 32,
            context_length: 96,
            ..ModelConfig::default()
        },
        generation_room: 24,
        max_test_samples: 6,
        ..HarnessConfig::default()
    }
    .with_seed(seed);
    c.sft.epochs = 1;
    c.dpo.epochs = 1;
    c.sampler.max_target_length = 20;
    c
}

#[test]
fn ablation_is_deterministic_and_pipelined() {
    let data = inputs(3);
    let harness = Harness::new(&data, config(3)).unwrap();
    let first = harness.run_all().unwrap();
    let second = Harness::new(&data, config(3)).unwrap().run_all().unwrap();

    let settings: Vec<_> = first.iter().map(|(r, _)| r.setting).collect();
    assert_eq!(settings, AblationSetting::ALL);
    for ((a, ca), (b, cb)) in first.iter().zip(&second) {
        assert_eq!(a.checkpoint_digest, b.checkpoint_digest);
        assert_eq!(ca.digest(), cb.digest());
        assert_eq!(a.report, b.report);
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.config_hash, first[0].0.config_hash);
        assert_eq!(a.samples.len(), 6);
        assert_eq!(a.dpo.is_some(), a.setting.uses_dpo());
    }
    // Bare prompts never carry facts.
    assert!(first[0].0.samples.iter().all(|s| s.facts.is_empty()));
    assert!(first[1].0.samples.iter().any(|s| !s.facts.is_empty()));

    // The DPO stage starts from the base setting's SFT checkpoint and moves it.
    let (wc, wc_ckpt) = &first[0];
    let (dpo_wc, dpo_ckpt) = &first[2];
    assert_ne!(wc.checkpoint_digest, dpo_wc.checkpoint_digest);
    assert_eq!(dpo_ckpt.tokenizer, wc_ckpt.tokenizer);
    let (standalone, _) = harness.run_setting(AblationSetting::DpoWc, None).unwrap();
    assert_eq!(standalone.checkpoint_digest, dpo_wc.checkpoint_digest);

    let results: Vec<_> = first.into_iter().map(|(r, _)| r).collect();
    let table = ablation_table(&results).unwrap();
    assert_eq!(table.lines().count(), 6);
    assert!(ablation_table(&results[..3]).is_err());
}

#[test]
fn different_seeds_give_different_runs() {
    let data = inputs(3);
    let a = Harness::new(&data, config(3)).unwrap().run_setting(AblationSetting::Wc, None).unwrap().0;
    let b = Harness::new(&data, config(4)).unwrap().run_setting(AblationSetting::Wc, None).unwrap().0;
    assert_ne!(a.checkpoint_digest, b.checkpoint_digest);
    assert_ne!(a.config_hash, b.config_hash);
}

#[test]
fn preference_modes_follow_the_corruption_stream() {
    let data = inputs(5);
    let harness = Harness::new(&data, config(5)).unwrap();
    let sft = harness.train_sft(Setting::Context).unwrap();
    let prefs = harness.preferences(&data.train, &sft, Setting::Context).unwrap();
    assert!(!prefs.is_empty());
    let modes: Vec<_> = prefs.iter().map(|p| p.corruption_mode).collect();
    assert_eq!(modes, draw_corruption_modes(5, prefs.len()));
    for p in &prefs {
        assert_eq!(p.y_plus, p.gold);
        assert_ne!(p.y_minus, p.y_plus);
    }
    assert_eq!(prefs, harness.preferences(&data.train, &sft, Setting::Context).unwrap());
}

#[test]
fn scorecards_round_trip_and_average() {
    let data = inputs(3);
    let harness = Harness::new(&data, config(3)).unwrap();
    let (result, _) = harness.run_setting(AblationSetting::Context, None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("context.jsonl");
    assert_eq!(export_scorecards(&result, &path).unwrap(), result.samples.len());
    let mut cards = load_scorecards(&path).unwrap();
    assert_eq!(cards.len(), result.samples.len());
    assert!(cards.iter().all(|c| c.ratings == Ratings::default()));
    assert_eq!(cards[0].generated, result.samples[0].generated);

    cards[0].ratings.fluency = Some(4.0);
    cards[1].ratings.fluency = Some(5.0);
    cards[1].ratings.readability = Some(2.0);
    fs::write(&path, to_jsonl(&cards).unwrap()).unwrap();
    let mean = mean_ratings(&load_scorecards(&path).unwrap());
    assert_eq!(mean.fluency, Some(4.5));
    assert_eq!(mean.readability, Some(2.0));
    assert_eq!(mean.adequacy, None);

    cards[2].ratings.consistency = Some(7.0);
    fs::write(&path, to_jsonl(&cards).unwrap()).unwrap();
    assert!(load_scorecards(&path).is_err());
}

#[test]
fn classifier_separates_politeness_on_held_out_templates() {
    let train = synth_politeness_fixture(240, 1).unwrap();
    let test = synth_politeness_fixture(90, 2).unwrap();
    let cfg = TrainConfig { epochs: 6, batch_size: 16, lr: 1e-2, weight_decay: 0.0, seed: 1 };
    let clf = train_classifier(&train, ClassifierConfig::default(), &cfg).unwrap();
    let acc = clf.accuracy(&test).unwrap();
    assert!(acc >= 0.90, "held-out accuracy {acc}");
}
