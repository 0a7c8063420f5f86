use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use anyhow::{Context, Result};
use finchat_core::harness::{ablation_table, export_scorecards, AblationInputs, AblationSetting, Harness};
use finchat_core::{AblationResult, ModelCheckpoint, Setting};

use super::{read_corpus, Ctx};
use crate::output::{write_json, write_text};
use crate::EvalCmd;

pub fn run(ctx: &mut Ctx, cmd: EvalCmd) -> Result<()> {
    let EvalCmd::Ablation { corpus, index, seed, settings, max_samples, out } = cmd;
    ctx.config.require_seed(seed)?;
    if let Some(n) = max_samples {
        ctx.config.eval.max_test_samples = n;
    }
    let dir = ctx.corpus_path(corpus)?;
    let inputs = AblationInputs {
        train: read_corpus(&dir.join("train.jsonl")).context("reading the training split")?,
        test: read_corpus(&dir.join("test.jsonl")).context("reading the test split")?,
        index: ctx.index(index)?,
    };
    let harness = Harness::new(&inputs, ctx.config.harness())?;
    let wanted: Vec<AblationSetting> =
        AblationSetting::ALL.into_iter().filter(|s| settings.is_empty() || settings.contains(s)).collect();

    let out = ctx.out(&out);
    let provenance = ctx.config.provenance("eval ablation");
    let mut sft: BTreeMap<Setting, ModelCheckpoint> = BTreeMap::new();
    let mut results: Vec<AblationResult> = Vec::new();
    let mut timing = serde_json::Map::new();
    for setting in wanted {
        let base = setting.base();
        if let Entry::Vacant(slot) = sft.entry(base) {
            eprintln!("training {base} model");
            let mut c = harness.train_sft(base)?;
            c.meta.provenance = provenance.clone();
            slot.insert(c);
        }
        eprintln!("running {setting}");
        let (result, mut checkpoint) = harness.run_setting(setting, sft.get(&base))?;
        checkpoint.meta.provenance = provenance.clone();
        checkpoint.save(&out.join("checkpoints").join(setting.slug()))?;
        write_json(&out.join(format!("{}.json", setting.slug())), &result)?;
        let cards = out.join("scorecards");
        std::fs::create_dir_all(&cards).with_context(|| format!("creating {}", cards.display()))?;
        export_scorecards(&result, &cards.join(format!("{}.jsonl", setting.slug())))?;
        timing.insert(setting.slug().to_string(), serde_json::json!(result.wall_clock_secs));
        println!(
            "{setting}: {}",
            result.report.columns().map(|v| v.map_or("-".into(), |v| format!("{v:.2}"))).join(" ")
        );
        results.push(result);
    }
    write_json(
        &out.join("run.json"),
        &serde_json::json!({ "provenance": provenance, "classifier": harness.classifier.digest() }),
    )?;
    // Wall-clock times vary between runs, so they live apart from the results.
    write_json(&out.join("timing.json"), &timing)?;
    if results.len() == AblationSetting::ALL.len() {
        let table = ablation_table(&results)?;
        write_text(&out.join("table.md"), &table)?;
        print!("\n{table}");
    }
    Ok(())
}
