//! Commonsense triples, verbalization, hashing embeddings, thresholded
//! retrieval and prompt fusion.

mod bank;
mod embed;
mod fuse;
mod index;

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bank::{financial_bank, BankEntry};
pub use embed::{cosine, EmbeddingVector, HashingEmbedder, DEFAULT_DIM};
pub use fuse::{fuse, with_history, AugmentedPrompt, FusionMode};
pub use index::{IndexEntry, KnowledgeIndex, DEFAULT_K, DEFAULT_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RelationTag {
    #[serde(rename = "xIntent")]
    XIntent,
    #[serde(rename = "xWant")]
    XWant,
    #[serde(rename = "xNeed")]
    XNeed,
    #[serde(rename = "xReason")]
    XReason,
    #[serde(rename = "xEffect")]
    XEffect,
    RelatedTo,
    UsedFor,
}

impl RelationTag {
    pub const ALL: [RelationTag; 7] = [
        RelationTag::XIntent,
        RelationTag::XWant,
        RelationTag::XNeed,
        RelationTag::XReason,
        RelationTag::XEffect,
        RelationTag::RelatedTo,
        RelationTag::UsedFor,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RelationTag::XIntent => "xIntent",
            RelationTag::XWant => "xWant",
            RelationTag::XNeed => "xNeed",
            RelationTag::XReason => "xReason",
            RelationTag::XEffect => "xEffect",
            RelationTag::RelatedTo => "RelatedTo",
            RelationTag::UsedFor => "UsedFor",
        }
    }
}

impl fmt::Display for RelationTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelationTag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|r| r.as_str() == s).ok_or_else(|| format!("unknown relation {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnowledgeTriple {
    pub head: String,
    pub relation: RelationTag,
    pub tail: String,
}

impl KnowledgeTriple {
    pub fn new(head: impl Into<String>, relation: RelationTag, tail: impl Into<String>) -> Self {
        Self { head: head.into(), relation, tail: tail.into() }
    }

    pub fn is_valid(&self) -> bool {
        !self.head.trim().is_empty() && !self.tail.trim().is_empty()
    }
}

/// A triple rendered as a sentence, with the similarity it was retrieved at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerbalizedFact {
    pub text: String,
    pub source: KnowledgeTriple,
    pub similarity: f64,
}

/// Fixed sentence template per relation.
pub fn verbalize_text(triple: &KnowledgeTriple) -> String {
    let (h, t) = (&triple.head, &triple.tail);
    match triple.relation {
        RelationTag::UsedFor => format!("{h} is used for {t}."),
        RelationTag::RelatedTo => format!("{h} is related to {t}."),
        RelationTag::XIntent => format!("The user intends {t}."),
        RelationTag::XWant => format!("The user wants {t}."),
        RelationTag::XNeed => format!("The user needs {t}."),
        RelationTag::XReason => format!("The reason is {t}."),
        RelationTag::XEffect => format!("The effect is {t}."),
    }
}

pub fn verbalize(triple: &KnowledgeTriple) -> VerbalizedFact {
    VerbalizedFact { text: verbalize_text(triple), source: triple.clone(), similarity: 0.0 }
}

/// Parses `head<TAB>relation<TAB>tail` lines; blank lines and lines starting
/// with `#` are skipped.
pub fn parse_triples(text: &str) -> Result<Vec<KnowledgeTriple>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [head, relation, tail] = fields[..] else {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        };
        let relation =
            relation.trim().parse::<RelationTag>().map_err(|message| Error::Parse { line: line_no, message })?;
        let triple = KnowledgeTriple::new(head.trim(), relation, tail.trim());
        if !triple.is_valid() {
            return Err(Error::Parse { line: line_no, message: "empty head or tail".into() });
        }
        out.push(triple);
    }
    Ok(out)
}

pub fn load_triples(path: &Path) -> Result<Vec<KnowledgeTriple>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_triples(&text)
}

pub fn format_triples(triples: &[KnowledgeTriple]) -> String {
    let mut out = String::from("# head\trelation\ttail\n");
    for t in triples {
        out.push_str(&format!("{}\t{}\t{}\n", t.head, t.relation, t.tail));
    }
    out
}

pub fn save_triples(path: &Path, triples: &[KnowledgeTriple]) -> Result<()> {
    fs::write(path, format_triples(triples)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn used_for_template() {
        let t = KnowledgeTriple::new("mutual funds", RelationTag::UsedFor, "diversifying investments");
        assert_eq!(verbalize(&t).text, "mutual funds is used for diversifying investments.");
    }

    #[test]
    fn related_to_self() {
        let t = KnowledgeTriple::new("x", RelationTag::RelatedTo, "x");
        assert_eq!(verbalize_text(&t), "x is related to x.");
    }

    #[test]
    fn intent_template() {
        let t = KnowledgeTriple::new("stocks", RelationTag::XIntent, "to know the difference");
        assert_eq!(verbalize_text(&t), "The user intends to know the difference.");
    }

    #[test]
    fn relation_names_roundtrip() {
        for r in RelationTag::ALL {
            assert_eq!(r.as_str().parse::<RelationTag>().unwrap(), r);
            assert_eq!(serde_json::to_string(&r).unwrap(), format!("\"{}\"", r.as_str()));
        }
        assert!("usedfor".parse::<RelationTag>().is_err());
    }

    #[test]
    fn triple_file_parsing() {
        let text = "# comment\n\nmutual funds\tUsedFor\tdiversifying investments\nretirement\tRelatedTo\tlong-term financial planning\n";
        let triples = parse_triples(text).unwrap();
        assert_eq!(triples.len(), 2);
        assert_eq!(parse_triples(&format_triples(&triples)).unwrap(), triples);
        assert!(matches!(parse_triples("a\tUsedFor\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_triples("# x\na\tKnows\tb\n"), Err(Error::Parse { line: 2, .. })));
    }

    proptest! {
        #[test]
        fn verbalize_is_injective_per_relation(
            h1 in "[a-z]{1,5}( [a-z]{1,5})?", t1 in "[a-z]{1,5}( [a-z]{1,5})?",
            h2 in "[a-z]{1,5}( [a-z]{1,5})?", t2 in "[a-z]{1,5}( [a-z]{1,5})?",
            r in prop::sample::select(vec![RelationTag::UsedFor, RelationTag::RelatedTo]),
        ) {
            let a = KnowledgeTriple::new(h1.clone(), r, t1.clone());
            let b = KnowledgeTriple::new(h2.clone(), r, t2.clone());
            prop_assume!(a != b);
            prop_assert_ne!(verbalize_text(&a), verbalize_text(&b));
        }
    }
}
