use anyhow::Result;
use finchat_core::knowledge::{financial_bank, load_triples, save_triples, HashingEmbedder, KnowledgeIndex};

use super::Ctx;
use crate::failure::Failure;
use crate::output::{ensure_parent, Style};
use crate::KnowledgeCmd;

pub fn run(ctx: &mut Ctx, cmd: KnowledgeCmd) -> Result<()> {
    match cmd {
        KnowledgeCmd::Build { triples, bank, threshold, out } => {
            if let Some(t) = threshold {
                ctx.config.retrieval.threshold = t;
            }
            let (source, list) = match triples {
                Some(path) if !bank => (path.display().to_string(), load_triples(&path)?),
                _ => ("builtin:financial-bank".to_string(), financial_bank().into_iter().map(|e| e.triple).collect()),
            };
            let mut index = KnowledgeIndex::build(&list, &HashingEmbedder::default(), ctx.config.retrieval.threshold)
                .map_err(|e| match e {
                finchat_core::Error::InvalidConfig(m) => Failure::BadFlag(m).into(),
                other => anyhow::Error::from(other),
            })?;
            let mut prov = ctx.config.provenance("knowledge build");
            prov["triples"] = serde_json::json!(source);
            index.provenance = prov;
            let out = ctx.out(&out);
            ensure_parent(&out)?;
            index.save(&out)?;
            println!("indexed {} facts -> {}", index.len(), out.display());
            Ok(())
        }
        KnowledgeCmd::Bank { out } => {
            let out = ctx.out(&out);
            ensure_parent(&out)?;
            let triples: Vec<_> = financial_bank().into_iter().map(|e| e.triple).collect();
            save_triples(&out, &triples)?;
            println!("wrote {} triples -> {}", triples.len(), out.display());
            Ok(())
        }
        KnowledgeCmd::Query { index, text, k } => {
            let index = ctx.index(index)?;
            let k = k.unwrap_or(ctx.config.retrieval.k);
            let facts = index.retrieve(&HashingEmbedder::new(index.dim), &text, k)?;
            let style = Style::detect();
            if facts.is_empty() {
                println!("{}", style.dim(&format!("no fact reaches threshold {}", index.threshold)));
            }
            for f in facts {
                println!("{:.4}\t{}", f.similarity, f.text);
            }
            Ok(())
        }
    }
}
