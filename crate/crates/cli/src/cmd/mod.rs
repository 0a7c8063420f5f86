//! Subcommand handlers.

mod chat;
mod corpus;
mod eval;
mod knowledge;
mod lm;
mod metrics;
mod politeness;
mod train;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use finchat_core::corpus::load_corpus;
use finchat_core::{DialogueRecord, KnowledgeIndex, ModelCheckpoint, SamplerConfig};

use crate::config::RunConfig;
use crate::failure::Failure;
use crate::output::resolve_out;
use crate::{Command, SamplingArgs};

pub fn dispatch(command: Command, config: RunConfig) -> Result<()> {
    let mut ctx = Ctx { config };
    match command {
        Command::Corpus(c) => corpus::run(&mut ctx, c),
        Command::Knowledge(c) => knowledge::run(&mut ctx, c),
        Command::Lm(c) => lm::run(&mut ctx, c),
        Command::Train(c) => train::run(&mut ctx, c),
        Command::Politeness(c) => politeness::run(&mut ctx, c),
        Command::Metrics(c) => metrics::run(&mut ctx, c),
        Command::Eval(c) => eval::run(&mut ctx, c),
        Command::Chat(a) => chat::run(&mut ctx, a),
    }
}

/// The resolved configuration plus the lookups every handler needs.
pub struct Ctx {
    pub config: RunConfig,
}

impl Ctx {
    /// A path from its flag, else from the config file, else an error naming the flag.
    pub fn path(&self, flag: Option<PathBuf>, from_config: Option<&PathBuf>, name: &'static str) -> Result<PathBuf> {
        flag.or_else(|| from_config.cloned()).ok_or_else(|| Failure::MissingFlag(name).into())
    }

    pub fn out(&self, path: &Path) -> PathBuf {
        resolve_out(path, self.config.paths.out_dir.as_deref())
    }

    pub fn corpus_path(&mut self, flag: Option<PathBuf>) -> Result<PathBuf> {
        let path = self.path(flag, self.config.paths.corpus.as_ref(), "--corpus")?;
        self.config.paths.corpus.get_or_insert(path.clone());
        Ok(path)
    }

    pub fn index(&mut self, flag: Option<PathBuf>) -> Result<KnowledgeIndex> {
        let path = self.path(flag, self.config.paths.index.as_ref(), "--index")?;
        self.config.paths.index = Some(path.clone());
        Ok(KnowledgeIndex::load(&path)?)
    }

    /// The index when one is given by flag or config; `None` otherwise.
    pub fn optional_index(&mut self, flag: Option<PathBuf>) -> Result<Option<KnowledgeIndex>> {
        if flag.is_none() && self.config.paths.index.is_none() {
            return Ok(None);
        }
        self.index(flag).map(Some)
    }

    pub fn checkpoint(&mut self, flag: Option<PathBuf>) -> Result<ModelCheckpoint> {
        let path = self.path(flag, self.config.paths.checkpoint.as_ref(), "--checkpoint")?;
        self.config.paths.checkpoint = Some(path.clone());
        ModelCheckpoint::load(&path).with_context(|| format!("loading checkpoint {}", path.display()))
    }

    pub fn sampler(&mut self, args: &SamplingArgs) -> Result<SamplerConfig> {
        self.config.require_seed(args.seed)?;
        let s = &mut self.config.sampler;
        if let Some(t) = args.temperature {
            s.temperature = t;
        }
        if let Some(k) = args.top_k {
            s.top_k = k;
        }
        if let Some(n) = args.max_length {
            s.max_target_length = n;
        }
        if args.greedy {
            s.do_sample = false;
        }
        s.validate().map_err(|e| Failure::BadFlag(e.to_string()))?;
        Ok(s.clone())
    }
}

pub fn read_corpus(path: &Path) -> Result<Vec<DialogueRecord>> {
    Ok(load_corpus(path)?)
}

/// Non-empty lines of a text file, trimmed.
pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_string).collect())
}
