use anyhow::Result;
use finchat_core::knowledge::HashingEmbedder;
use finchat_core::metrics::score_corpus;
use finchat_core::politeness::politeness_rate;
use finchat_core::PolitenessClassifier;

use super::{read_lines, Ctx};
use crate::failure::Failure;
use crate::output::{write_json, write_text};
use crate::MetricsCmd;

pub fn run(ctx: &mut Ctx, cmd: MetricsCmd) -> Result<()> {
    let MetricsCmd::Score { hyp, reference, classifier, out } = cmd;
    let hyps = read_lines(&hyp)?;
    let refs = read_lines(&reference)?;
    if hyps.len() != refs.len() {
        return Err(Failure::Validation(format!("{} hypotheses but {} references", hyps.len(), refs.len())).into());
    }
    let politeness = match classifier.or_else(|| ctx.config.paths.classifier.clone()) {
        Some(path) => Some(politeness_rate(&PolitenessClassifier::load(&path)?, &hyps)?),
        None => None,
    };
    let (report, samples) = score_corpus(&hyps, &refs, &HashingEmbedder::default(), politeness)?;
    for (i, s) in samples.iter().enumerate() {
        for w in &s.warnings {
            eprintln!("warning: pair {}: {w}", i + 1);
        }
    }
    let out = ctx.out(&out);
    let table = report.render();
    let record = serde_json::json!({
        "report": report,
        "samples": samples,
        "provenance": ctx.config.provenance("metrics score"),
    });
    write_json(&out.join("report.json"), &record)?;
    write_text(&out.join("report.md"), &table)?;
    print!("{table}");
    Ok(())
}
