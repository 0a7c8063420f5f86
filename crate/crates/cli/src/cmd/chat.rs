//! Line-oriented chat session. Reads stdin until EOF or `/quit`; piped input
//! gives a transcript that depends only on the inputs and the seed.

use std::io::{self, BufRead, IsTerminal, Write};

use anyhow::{Context, Result};
use finchat_core::harness::generate_reply;
use finchat_core::tinylm::Sampler;
use finchat_core::training::PromptBuilder;
use finchat_core::{PolitenessClassifier, Setting};

use super::Ctx;
use crate::failure::Failure;
use crate::output::{write_text, Style};
use crate::ChatArgs;

const HELP: &str = "commands: /reset, /facts on|off, /quit";

pub fn run(ctx: &mut Ctx, args: ChatArgs) -> Result<()> {
    let mut sampling = args.sampling;
    sampling.seed = Some(sampling.seed.or(ctx.config.seed).unwrap_or(0));
    let sampler_config = ctx.sampler(&sampling)?;
    let checkpoint = ctx.checkpoint(args.checkpoint)?;
    let index = match args.setting {
        Setting::Context => Some(ctx.index(args.index)?),
        Setting::Wc => None,
    };
    let clf_path = ctx.path(args.classifier, ctx.config.paths.classifier.as_ref(), "--classifier")?;
    let classifier = PolitenessClassifier::load(&clf_path).context("loading politeness classifier")?;

    let r = &ctx.config.retrieval;
    let mut builder =
        PromptBuilder::new(args.setting, index.as_ref()).with_history_budget(r.history_budget).with_fusion(r.fusion);
    builder.k = r.k;
    let room = ctx.config.eval.generation_room;
    let mut sampler = Sampler::new(sampler_config)?;

    let stdin = io::stdin();
    let interactive = stdin.is_terminal();
    let style = Style::detect();
    let mut stdout = io::stdout().lock();
    let mut transcript = String::new();
    let mut history: Vec<(String, String)> = Vec::new();
    let mut show_facts = true;

    // Mirrors every session line to stdout (styled) and the transcript (plain).
    let mut emit = |transcript: &mut String, plain: String, styled: String| -> Result<()> {
        writeln!(stdout, "{styled}")?;
        transcript.push_str(&plain);
        transcript.push('\n');
        Ok(())
    };

    if interactive {
        eprintln!("{}", style.dim(HELP));
    }
    let mut lines = stdin.lock().lines();
    loop {
        if interactive {
            eprint!("you> ");
            io::stderr().flush()?;
        }
        let Some(line) = lines.next() else { break };
        let line = line.context("reading input")?;
        let input = line.trim();
        if input.is_empty() {
            continue;
        }
        if let Some(command) = input.strip_prefix('/') {
            let words: Vec<&str> = command.split_whitespace().collect();
            match words.as_slice() {
                ["quit"] | ["exit"] => break,
                ["reset"] => {
                    history.clear();
                    emit(&mut transcript, "(history cleared)".into(), style.dim("(history cleared)"))?;
                }
                ["facts", "on"] => show_facts = true,
                ["facts", "off"] => show_facts = false,
                _ => emit(&mut transcript, HELP.into(), style.dim(HELP))?,
            }
            continue;
        }

        emit(&mut transcript, format!("you: {input}"), format!("{} {input}", style.bold("you:")))?;
        let (prompt, facts) = builder.build(&history, input)?;
        if show_facts && args.setting == Setting::Context {
            if facts.is_empty() {
                emit(&mut transcript, "  facts: none".into(), style.dim("  facts: none"))?;
            }
            for f in &facts {
                let text = format!("  fact [{:.4}] {}", f.similarity, f.text);
                emit(&mut transcript, text.clone(), style.dim(&text))?;
            }
        }
        let reply = generate_reply(&checkpoint, &prompt, &mut sampler, room)?;
        emit(&mut transcript, format!("bot: {reply}"), format!("{} {reply}", style.bold("bot:")))?;
        let verdict = classifier.classify(&reply);
        let p = verdict.probabilities;
        let text =
            format!("  politeness: {} (polite {:.3}, neutral {:.3}, impolite {:.3})", verdict.label, p[0], p[1], p[2]);
        emit(&mut transcript, text.clone(), style.dim(&text))?;
        history.push((input.to_string(), reply));
    }

    if let Some(path) = args.transcript {
        write_text(&ctx.out(&path), &transcript).map_err(|e| Failure::Io(format!("{e:#}")))?;
    }
    Ok(())
}
