use anyhow::Result;
use finchat_core::politeness::{labelled_utterances, politeness_rate, train_classifier};
use finchat_core::PolitenessClassifier;

use super::{read_corpus, read_lines, Ctx};
use crate::output::write_text;
use crate::PolitenessCmd;

pub fn run(ctx: &mut Ctx, cmd: PolitenessCmd) -> Result<()> {
    match cmd {
        PolitenessCmd::Train { corpus, seed, out } => {
            ctx.config.require_seed(seed)?;
            let data = labelled_utterances(&read_corpus(&ctx.corpus_path(corpus)?)?);
            let mut clf = train_classifier(&data, ctx.config.classifier.clone(), &ctx.config.classifier_train)?;
            clf.meta.provenance = ctx.config.provenance("politeness train");
            let out = ctx.out(&out);
            clf.save(&out)?;
            println!(
                "train accuracy {:.4} on {} utterances; classifier -> {}",
                clf.accuracy(&data)?,
                data.len(),
                out.display()
            );
            Ok(())
        }
        PolitenessCmd::Score { checkpoint, input, out } => {
            let path = ctx.path(checkpoint, ctx.config.paths.classifier.as_ref(), "--checkpoint")?;
            let clf = PolitenessClassifier::load(&path)?;
            let lines = read_lines(&input)?;
            let mut records = String::new();
            for line in &lines {
                let v = clf.classify(line);
                let [p, n, i] = v.probabilities;
                println!("{}\t{p:.4}\t{n:.4}\t{i:.4}\t{line}", v.label);
                let row = serde_json::json!({ "text": line, "label": v.label, "probabilities": v.probabilities });
                records.push_str(&row.to_string());
                records.push('\n');
            }
            println!("politeness rate {:.2}", politeness_rate(&clf, &lines)?);
            if let Some(out) = out {
                write_text(&ctx.out(&out), &records)?;
            }
            Ok(())
        }
    }
}
