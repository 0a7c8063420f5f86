//! Multi-turn financial dialogue records: schema, validation and line-delimited
//! JSON storage.
//!
//! One record per line, fields in this order:
//!
//! ```text
//! {"id":"dlg-00001","domain":"stock","region":"global","politeness":"polite",
//!  "turns":[{"user":"...","bot":"..."}],
//!  "efair":{"engagement":4,"fluency":5,"adequacy":4,"information_preservation":4,"readability":5}}
//! ```
//!
//! `efair` is optional. Unknown fields are rejected.

mod split;
mod stats;
pub mod synth;

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use split::{split_corpus, CorpusSplit};
pub use stats::{corpus_stats, count_sentences, CorpusStats};
pub use synth::{synthesize_corpus, SynthConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainTag {
    Stock,
    Investment,
    PersonalFinance,
    Banking,
    Loan,
    GeneralFinance,
    CreditCard,
    Tax,
    Trading,
    Others,
}

impl DomainTag {
    pub const ALL: [DomainTag; 10] = [
        DomainTag::Stock,
        DomainTag::Investment,
        DomainTag::PersonalFinance,
        DomainTag::Banking,
        DomainTag::Loan,
        DomainTag::GeneralFinance,
        DomainTag::CreditCard,
        DomainTag::Tax,
        DomainTag::Trading,
        DomainTag::Others,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionTag {
    Global,
    Usa,
    India,
    Uk,
    Canada,
    Australia,
    Europe,
}

impl RegionTag {
    pub const ALL: [RegionTag; 7] = [
        RegionTag::Global,
        RegionTag::Usa,
        RegionTag::India,
        RegionTag::Uk,
        RegionTag::Canada,
        RegionTag::Australia,
        RegionTag::Europe,
    ];
}

/// Class order doubles as the classifier's output order and tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolitenessLabel {
    Polite,
    Neutral,
    Impolite,
}

impl PolitenessLabel {
    pub const ALL: [PolitenessLabel; 3] =
        [PolitenessLabel::Polite, PolitenessLabel::Neutral, PolitenessLabel::Impolite];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

impl fmt::Display for PolitenessLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PolitenessLabel::Polite => "polite",
            PolitenessLabel::Neutral => "neutral",
            PolitenessLabel::Impolite => "impolite",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Turn {
    pub user: String,
    pub bot: String,
}

impl Turn {
    pub fn new(user: impl Into<String>, bot: impl Into<String>) -> Self {
        Self { user: user.into(), bot: bot.into() }
    }
}

/// Annotation quality ratings, each on a 1–5 scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EFairScore {
    pub engagement: u8,
    pub fluency: u8,
    pub adequacy: u8,
    pub information_preservation: u8,
    pub readability: u8,
}

impl EFairScore {
    pub fn components(&self) -> [(&'static str, u8); 5] {
        [
            ("engagement", self.engagement),
            ("fluency", self.fluency),
            ("adequacy", self.adequacy),
            ("information_preservation", self.information_preservation),
            ("readability", self.readability),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DialogueRecord {
    pub id: String,
    pub domain: DomainTag,
    pub region: RegionTag,
    pub politeness: PolitenessLabel,
    pub turns: Vec<Turn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub efair: Option<EFairScore>,
}

/// One broken invariant: the offending field path and the rule it breaks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.field, self.rule)
    }
}

/// Every invariant the record breaks; empty when the record is valid.
pub fn validate_record(record: &DialogueRecord) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut flag = |field: String, rule: &str| out.push(Violation { field, rule: rule.to_string() });
    if record.id.trim().is_empty() {
        flag("id".into(), "empty id");
    }
    if record.turns.is_empty() {
        flag("turns".into(), "no turns");
    }
    for (i, turn) in record.turns.iter().enumerate() {
        if turn.user.trim().is_empty() {
            flag(format!("turns[{i}].user"), "empty user turn");
        }
        if turn.bot.trim().is_empty() {
            flag(format!("turns[{i}].bot"), "empty bot turn");
        }
    }
    if let Some(efair) = &record.efair {
        for (name, value) in efair.components() {
            if !(1..=5).contains(&value) {
                flag(format!("efair.{name}"), "out of [1,5]");
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IssueKind {
    Parse,
    Invariant,
    DuplicateId,
}

/// A problem found while linting a corpus file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusIssue {
    pub line: usize,
    pub id: Option<String>,
    pub kind: IssueKind,
    pub message: String,
}

impl fmt::Display for CorpusIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.id {
            Some(id) => write!(f, "line {} ({id}): {}", self.line, self.message),
            None => write!(f, "line {}: {}", self.line, self.message),
        }
    }
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| !l.trim().is_empty())
}

/// Reports every parse error, invariant violation and duplicate id in
/// `text`, without stopping at the first.
pub fn lint_corpus(text: &str) -> Vec<CorpusIssue> {
    let mut issues = Vec::new();
    let mut seen = HashSet::new();
    for (line, raw) in lines(text) {
        let record: DialogueRecord = match serde_json::from_str(raw) {
            Ok(r) => r,
            Err(e) => {
                let id = serde_json::from_str::<serde_json::Value>(raw)
                    .ok()
                    .and_then(|v| v.get("id").and_then(|i| i.as_str()).map(str::to_string));
                issues.push(CorpusIssue { line, id, kind: IssueKind::Parse, message: e.to_string() });
                continue;
            }
        };
        for v in validate_record(&record) {
            issues.push(CorpusIssue {
                line,
                id: Some(record.id.clone()),
                kind: IssueKind::Invariant,
                message: v.to_string(),
            });
        }
        if !seen.insert(record.id.clone()) {
            issues.push(CorpusIssue {
                line,
                id: Some(record.id.clone()),
                kind: IssueKind::DuplicateId,
                message: format!("duplicate id {:?}", record.id),
            });
        }
    }
    issues
}

/// Parses a corpus, failing on the first problem.
pub fn parse_corpus(text: &str) -> Result<Vec<DialogueRecord>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (line, raw) in lines(text) {
        let record: DialogueRecord =
            serde_json::from_str(raw).map_err(|e| Error::Parse { line, message: e.to_string() })?;
        if let Some(v) = validate_record(&record).into_iter().next() {
            return Err(Error::Invariant { id: record.id, rule: v.to_string() });
        }
        if !seen.insert(record.id.clone()) {
            return Err(Error::DuplicateId { id: record.id, line });
        }
        out.push(record);
    }
    Ok(out)
}

pub fn load_corpus(path: &Path) -> Result<Vec<DialogueRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&text)
}

/// Canonical encoding: one compact JSON object per line, `\n`-terminated.
pub fn to_jsonl<T: Serialize>(records: &[T]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn save_corpus(path: &Path, records: &[DialogueRecord]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, to_jsonl(records)?).map_err(|e| Error::io(path, e))
}
