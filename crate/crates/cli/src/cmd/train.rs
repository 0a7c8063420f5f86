use anyhow::{Context, Result};
use finchat_core::corpus::to_jsonl;
use finchat_core::training::{build_sft_examples, build_tokenizer, train_dpo, train_sft, PromptBuilder};
use finchat_core::{KnowledgeIndex, PreferenceRecord, Setting, TinyLm};

use super::{read_corpus, Ctx};
use crate::failure::Failure;
use crate::output::{sidecar, write_json, write_text};
use crate::{SftArgs, TrainCmd};

pub fn run(ctx: &mut Ctx, cmd: TrainCmd) -> Result<()> {
    match cmd {
        TrainCmd::Sft(args) => sft(ctx, args),
        TrainCmd::Prefs { corpus, checkpoint, setting, index, seed, out } => {
            let seed = ctx.config.require_seed(seed)?;
            let records = read_corpus(&ctx.corpus_path(corpus)?)?;
            let index = setting_index(ctx, setting, index)?;
            let policy = ctx.checkpoint(checkpoint)?;
            let builder = builder(ctx, setting, index.as_ref());
            let prefs = finchat_core::training::build_preference_set(&records, &policy, &builder, seed)?;
            let out = ctx.out(&out);
            write_text(&out, &to_jsonl(&prefs)?)?;
            let mut prov = ctx.config.provenance("train prefs");
            prov["setting"] = serde_json::json!(setting);
            write_json(&sidecar(&out), &prov)?;
            println!("wrote {} preference records -> {}", prefs.len(), out.display());
            Ok(())
        }
        TrainCmd::Dpo { checkpoint, prefs, beta, reference, seed, epochs, lr, out } => {
            ctx.config.require_seed(seed)?;
            let d = &mut ctx.config.dpo;
            if let Some(b) = beta {
                d.beta = b;
            }
            if let Some(e) = epochs {
                d.epochs = e;
            }
            if let Some(l) = lr {
                d.lr = l;
            }
            d.use_reference |= reference;
            d.validate().map_err(|e| Failure::BadFlag(e.to_string()))?;
            let records = read_preferences(&prefs)?;
            let start = ctx.checkpoint(checkpoint)?;
            let (mut tuned, report) = train_dpo(start, &records, &ctx.config.dpo)?;
            tuned.meta.provenance = ctx.config.provenance("train dpo");
            let out = ctx.out(&out);
            tuned.save(&out)?;
            println!(
                "margin {:.4} -> {:.4} over {} epochs; checkpoint -> {}",
                report.initial_margin,
                report.final_margin,
                report.epoch_margins.len(),
                out.display()
            );
            Ok(())
        }
    }
}

fn setting_index(ctx: &mut Ctx, setting: Setting, flag: Option<std::path::PathBuf>) -> Result<Option<KnowledgeIndex>> {
    match setting {
        Setting::Context => ctx.index(flag).map(Some),
        Setting::Wc => ctx.optional_index(flag),
    }
}

fn builder<'a>(ctx: &Ctx, setting: Setting, index: Option<&'a KnowledgeIndex>) -> PromptBuilder<'a> {
    let r = &ctx.config.retrieval;
    let mut b = PromptBuilder::new(setting, index).with_history_budget(r.history_budget).with_fusion(r.fusion);
    b.k = r.k;
    b
}

pub fn read_preferences(path: &std::path::Path) -> Result<Vec<PreferenceRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| Failure::Validation(format!("{} line {}: {e}", path.display(), i + 1)).into())
        })
        .collect()
}

pub fn sft(ctx: &mut Ctx, args: SftArgs) -> Result<()> {
    let seed = ctx.config.require_seed(args.seed)?;
    if let Some(e) = args.epochs {
        ctx.config.sft.epochs = e;
    }
    if let Some(l) = args.lr {
        ctx.config.sft.lr = l;
    }
    ctx.config.sft.validate().map_err(|e| Failure::BadFlag(e.to_string()))?;
    let records = read_corpus(&ctx.corpus_path(args.corpus)?)?;
    let index = setting_index(ctx, args.setting, args.index)?;
    let triples: Vec<_> = index.iter().flat_map(|i| i.entries.iter().map(|e| e.triple.clone())).collect();
    let tokenizer = build_tokenizer(&records, &triples, ctx.config.eval.max_vocab);
    let model_config = finchat_core::ModelConfig { vocab_size: tokenizer.vocab_size(), ..ctx.config.model.clone() };
    let model = TinyLm::init(model_config, seed).context("initializing model")?;
    let examples = build_sft_examples(&records, &builder(ctx, args.setting, index.as_ref()))?;
    let mut checkpoint = train_sft(model, tokenizer, &examples, &ctx.config.sft)?;
    let mut prov = ctx.config.provenance("train sft");
    prov["setting"] = serde_json::json!(args.setting);
    checkpoint.meta.provenance = prov;
    let out = ctx.out(&args.out);
    checkpoint.save(&out)?;
    let losses: Vec<String> = checkpoint.meta.epoch_losses.iter().map(|l| format!("{l:.4}")).collect();
    println!("epoch losses [{}]; checkpoint -> {}", losses.join(", "), out.display());
    Ok(())
}
