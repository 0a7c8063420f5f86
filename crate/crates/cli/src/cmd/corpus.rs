use anyhow::Result;
use finchat_core::corpus::{corpus_stats, lint_corpus, save_corpus, split_corpus, synthesize_corpus};

use super::{read_corpus, Ctx};
use crate::failure::Failure;
use crate::output::{sidecar, write_json, Style};
use crate::CorpusCmd;

pub fn run(ctx: &mut Ctx, cmd: CorpusCmd) -> Result<()> {
    match cmd {
        CorpusCmd::Validate { file } => {
            let text = std::fs::read_to_string(&file).map_err(|e| Failure::Io(format!("{}: {e}", file.display())))?;
            let issues = lint_corpus(&text);
            for issue in &issues {
                println!("{issue}");
            }
            if issues.is_empty() {
                let n = text.lines().filter(|l| !l.trim().is_empty()).count();
                println!("ok: {n} records");
                Ok(())
            } else {
                Err(Failure::Validation(format!("{} issue(s) in {}", issues.len(), file.display())).into())
            }
        }
        CorpusCmd::Stats { file, json } => {
            let stats = corpus_stats(&read_corpus(&file)?)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&stats)?);
                return Ok(());
            }
            let style = Style::detect();
            let rows: [(&str, String); 10] = [
                ("records", stats.records.to_string()),
                ("turns", stats.turns.to_string()),
                ("vocabulary", stats.vocabulary_size.to_string()),
                ("avg user tokens", format!("{:.2}", stats.avg_user_tokens)),
                ("avg bot tokens", format!("{:.2}", stats.avg_bot_tokens)),
                ("avg user sentences", format!("{:.2}", stats.avg_user_sentences)),
                ("avg bot sentences", format!("{:.2}", stats.avg_bot_sentences)),
                ("words per conversation", format!("{:.2}", stats.words_per_conversation)),
                ("unique bigrams", stats.unique_bigrams.to_string()),
                ("unique trigrams", stats.unique_trigrams.to_string()),
            ];
            for (k, v) in rows {
                println!("{:<24}{v}", style.bold(k));
            }
            for (d, n) in &stats.per_domain_counts {
                println!("{:<24}{n}", format!("domain {}", tag(d)));
            }
            for (r, n) in &stats.per_region_counts {
                println!("{:<24}{n}", format!("region {}", tag(r)));
            }
            Ok(())
        }
        CorpusCmd::Synth { count, seed, grounding, out } => {
            let seed = ctx.config.require_seed(seed)?;
            if let Some(c) = count {
                ctx.config.synth.count = c;
            }
            if let Some(g) = grounding {
                ctx.config.synth.grounding = g;
            }
            let r = &ctx.config.retrieval;
            let synth = ctx.config.synth.to_config(r.threshold, r.k);
            synth.validate().map_err(|e| Failure::BadFlag(e.to_string()))?;
            let records = synthesize_corpus(&synth, seed)?;
            let out = ctx.out(&out);
            save_corpus(&out, &records)?;
            write_json(&sidecar(&out), &ctx.config.provenance("corpus synth"))?;
            println!("wrote {} records to {}", records.len(), out.display());
            Ok(())
        }
        CorpusCmd::Split { file, train, dev, test, seed, out } => {
            let seed = ctx.config.require_seed(seed)?;
            let records = read_corpus(&file)?;
            let split = split_corpus(&records, (train, dev, test), seed)?;
            let out = ctx.out(&out);
            for (name, part) in [("train", &split.train), ("dev", &split.dev), ("test", &split.test)] {
                let path = out.join(format!("{name}.jsonl"));
                save_corpus(&path, part)?;
                println!("{name}: {} records -> {}", part.len(), path.display());
            }
            let mut prov = ctx.config.provenance("corpus split");
            prov["fractions"] = serde_json::json!([train, dev, test]);
            prov["source"] = serde_json::json!(file);
            write_json(&out.join("split.provenance.json"), &prov)?;
            Ok(())
        }
    }
}

/// The serialized name of an enum tag.
fn tag<T: serde::Serialize>(value: &T) -> String {
    match serde_json::to_value(value) {
        Ok(serde_json::Value::String(s)) => s,
        _ => String::new(),
    }
}
