use serde::{Deserialize, Serialize};

use super::embed::{EmbeddingVector, HashingEmbedder};
use super::VerbalizedFact;
use crate::tinylm::tokenizer::{BOT_MARKER, KNOWLEDGE_MARKER, QUERY_MARKER, RESPONSE_MARKER, USER_MARKER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    /// Facts are spliced into the prompt text between literal markers.
    #[default]
    Textual,
    /// Facts are averaged into one embedding that the model projects into
    /// pseudo-token slots ahead of the prompt.
    EmbeddingPrefix,
}

/// A prompt ready for the language model.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedPrompt {
    pub text: String,
    /// Mean fact embedding; present only in [`FusionMode::EmbeddingPrefix`].
    pub knowledge: Option<EmbeddingVector>,
}

/// Builds `[KNOWLEDGE] f₁ f₂ … [QUERY] query [RESPONSE]`.
///
/// In prefix mode the knowledge segment stays empty in the text and the
/// facts travel as the mean of their embeddings (zero when there are none).
pub fn fuse(query: &str, facts: &[VerbalizedFact], mode: FusionMode, embedder: &HashingEmbedder) -> AugmentedPrompt {
    let mut parts: Vec<&str> = vec![KNOWLEDGE_MARKER];
    let knowledge = match mode {
        FusionMode::Textual => {
            parts.extend(facts.iter().map(|f| f.text.as_str()));
            None
        }
        FusionMode::EmbeddingPrefix => {
            let mut mean = vec![0.0; embedder.dim()];
            for f in facts {
                for (m, v) in mean.iter_mut().zip(embedder.embed(&f.text).values()) {
                    *m += v / facts.len() as f64;
                }
            }
            Some(EmbeddingVector::from_values(mean))
        }
    };
    parts.extend([QUERY_MARKER, query.trim(), RESPONSE_MARKER]);
    AugmentedPrompt { text: parts.join(" "), knowledge }
}

/// Prefixes earlier turns as `[USER] u [BOT] b …` ahead of a fused prompt.
pub fn with_history(history: &[(String, String)], prompt: &str) -> String {
    let mut out = String::new();
    for (u, b) in history {
        out.push_str(&format!("{USER_MARKER} {} {BOT_MARKER} {} ", u.trim(), b.trim()));
    }
    out.push_str(prompt);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::{verbalize, KnowledgeTriple, RelationTag};

    #[test]
    fn no_facts_is_well_formed() {
        let p = fuse("q", &[], FusionMode::Textual, &HashingEmbedder::default());
        assert_eq!(p.text, "[KNOWLEDGE] [QUERY] q [RESPONSE]");
        assert!(p.knowledge.is_none());
    }

    #[test]
    fn fact_is_spliced_verbatim() {
        let f = verbalize(&KnowledgeTriple::new("mutual funds", RelationTag::UsedFor, "diversifying investments"));
        let p = fuse("should I buy mutual funds", &[f], FusionMode::Textual, &HashingEmbedder::default());
        assert_eq!(
            p.text,
            "[KNOWLEDGE] mutual funds is used for diversifying investments. [QUERY] should I buy mutual funds [RESPONSE]"
        );
    }

    #[test]
    fn prefix_mode_keeps_text_clean() {
        let e = HashingEmbedder::default();
        let f = verbalize(&KnowledgeTriple::new("a", RelationTag::UsedFor, "b"));
        let p = fuse("q", &[f.clone(), f], FusionMode::EmbeddingPrefix, &e);
        assert_eq!(p.text, "[KNOWLEDGE] [QUERY] q [RESPONSE]");
        let k = p.knowledge.unwrap();
        assert!((k.norm() - 1.0).abs() < 1e-12);
        assert!(fuse("q", &[], FusionMode::EmbeddingPrefix, &e).knowledge.unwrap().is_zero());
    }

    #[test]
    fn history_comes_first() {
        let h = vec![("hi".to_string(), "hello".to_string())];
        assert_eq!(
            with_history(&h, "[KNOWLEDGE] [QUERY] q [RESPONSE]"),
            "[USER] hi [BOT] hello [KNOWLEDGE] [QUERY] q [RESPONSE]"
        );
    }
}
