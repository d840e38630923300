//! Documents, labels, annotations and the relation-sense registry.

mod corpus;
mod registry;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use corpus::{read_corpus, write_corpus, DocumentRecord, LabelField};
pub use registry::{load_registry, RelationKind, RelationSense, RelationSenseRegistry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoherenceLabel {
    Low,
    Medium,
    High,
}

impl CoherenceLabel {
    pub const ALL: [CoherenceLabel; 3] = [CoherenceLabel::Low, CoherenceLabel::Medium, CoherenceLabel::High];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CoherenceLabel::Low => "low",
            CoherenceLabel::Medium => "medium",
            CoherenceLabel::High => "high",
        }
    }
}

impl fmt::Display for CoherenceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CoherenceLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(CoherenceLabel::Low),
            "medium" => Ok(CoherenceLabel::Medium),
            "high" => Ok(CoherenceLabel::High),
            other => Err(Error::structural(format!("unknown coherence label {other:?}"))),
        }
    }
}

/// Raw rating scales found in coherence corpora.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScoreScheme {
    /// 1..=3 expert ratings.
    #[serde(rename = "gcdc3")]
    Gcdc3,
    /// 1..=5 ratings; 1-2 low, 3-4 medium, 5 high.
    #[serde(rename = "cohesentia5")]
    Cohesentia5,
}

impl ScoreScheme {
    pub fn name(self) -> &'static str {
        match self {
            ScoreScheme::Gcdc3 => "gcdc3",
            ScoreScheme::Cohesentia5 => "cohesentia5",
        }
    }
}

pub fn map_raw_score(scheme: ScoreScheme, score: i64) -> Result<CoherenceLabel> {
    use CoherenceLabel::*;
    let label = match (scheme, score) {
        (ScoreScheme::Gcdc3, 1) => Low,
        (ScoreScheme::Gcdc3, 2) => Medium,
        (ScoreScheme::Gcdc3, 3) => High,
        (ScoreScheme::Cohesentia5, 1 | 2) => Low,
        (ScoreScheme::Cohesentia5, 3 | 4) => Medium,
        (ScoreScheme::Cohesentia5, 5) => High,
        _ => {
            return Err(Error::ScoreOutOfRange {
                scheme: scheme.name(),
                value: score,
            })
        }
    };
    Ok(label)
}

/// Which cue families a model or prompt is allowed to see.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
pub enum Variant {
    TextOnly,
    TextEnty,
    TextRel,
    #[default]
    Full,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::TextOnly, Variant::TextEnty, Variant::TextRel, Variant::Full];

    pub fn uses_entities(self) -> bool {
        matches!(self, Variant::TextEnty | Variant::Full)
    }

    pub fn uses_relations(self) -> bool {
        matches!(self, Variant::TextRel | Variant::Full)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::TextOnly => "TextOnly",
            Variant::TextEnty => "TextEnty",
            Variant::TextRel => "TextRel",
            Variant::Full => "Full",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}")))
    }
}

/// Half-open token range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TokenSpan {
    pub start: usize,
    pub end: usize,
}

impl TokenSpan {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Mention {
    pub sentence: usize,
    #[serde(flatten)]
    pub span: TokenSpan,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NounAnnotation {
    pub sentence: usize,
    #[serde(flatten)]
    pub span: TokenSpan,
    pub surface: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorefLink {
    pub a: Mention,
    pub b: Mention,
}

/// Direction of a Cause relation between sentence i (arg1) and i+1 (arg2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CauseDirection {
    /// arg2 is the cause of arg1.
    Reason,
    /// arg2 is the effect of arg1.
    Result,
}

/// A relation between sentence `sentence` and `sentence + 1`. The sense is
/// kept as written; it is resolved against the registry when the graph is built.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationAnnotation {
    pub sentence: usize,
    pub sense: String,
    pub kind: RelationKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<CauseDirection>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationSet {
    #[serde(default)]
    pub nouns: Vec<NounAnnotation>,
    #[serde(default)]
    pub coref_links: Vec<CorefLink>,
    #[serde(default)]
    pub relations: Vec<RelationAnnotation>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    /// 1-based position in the document.
    pub index: usize,
    pub text: String,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub sentences: Vec<Sentence>,
    pub label: Option<CoherenceLabel>,
    pub domain_tag: String,
    pub annotations: AnnotationSet,
}

impl Document {
    /// Builds a document from token lists; sentence text is the tokens joined by spaces.
    pub fn from_tokens(
        id: impl Into<String>,
        domain_tag: impl Into<String>,
        label: Option<CoherenceLabel>,
        sentences: Vec<Vec<String>>,
        annotations: AnnotationSet,
    ) -> Result<Self> {
        let sentences = sentences
            .into_iter()
            .enumerate()
            .map(|(k, tokens)| Sentence {
                index: k + 1,
                text: tokens.join(" "),
                tokens,
            })
            .collect();
        let doc = Document {
            id: id.into(),
            sentences,
            label,
            domain_tag: domain_tag.into(),
            annotations,
        };
        doc.validate()?;
        Ok(doc)
    }

    pub fn n_sentences(&self) -> usize {
        self.sentences.len()
    }

    fn check_mention(&self, what: &str, sentence: usize, span: TokenSpan) -> Result<()> {
        let n = self.sentences.len();
        if sentence == 0 || sentence > n {
            return Err(Error::structural(format!(
                "{}: {what} references sentence {sentence}, document has {n}",
                self.id
            )));
        }
        let len = self.sentences[sentence - 1].tokens.len();
        if span.start >= span.end || span.end > len {
            return Err(Error::structural(format!(
                "{}: {what} span [{}, {}) outside sentence {sentence} ({len} tokens)",
                self.id, span.start, span.end
            )));
        }
        Ok(())
    }

    /// Checks indexing, token spans and relation adjacency.
    pub fn validate(&self) -> Result<()> {
        for (k, s) in self.sentences.iter().enumerate() {
            if s.index != k + 1 {
                return Err(Error::structural(format!(
                    "{}: sentence at position {} has index {}",
                    self.id,
                    k + 1,
                    s.index
                )));
            }
            if !s.text.trim().is_empty() && s.tokens.is_empty() {
                return Err(Error::structural(format!(
                    "{}: sentence {} has text but no tokens",
                    self.id, s.index
                )));
            }
        }
        for noun in &self.annotations.nouns {
            self.check_mention("noun", noun.sentence, noun.span)?;
            if noun.surface.trim().is_empty() {
                return Err(Error::structural(format!("{}: empty noun surface", self.id)));
            }
        }
        for link in &self.annotations.coref_links {
            self.check_mention("coref mention", link.a.sentence, link.a.span)?;
            self.check_mention("coref mention", link.b.sentence, link.b.span)?;
        }
        let n = self.sentences.len();
        for rel in &self.annotations.relations {
            if rel.sentence == 0 || rel.sentence >= n {
                return Err(Error::structural(format!(
                    "{}: relation at sentence {} does not join two adjacent sentences (document has {n})",
                    self.id, rel.sentence
                )));
            }
        }
        Ok(())
    }

    /// Case-folded surface text of a mention.
    pub fn mention_text(&self, m: &Mention) -> String {
        self.sentences[m.sentence - 1].tokens[m.span.start..m.span.end]
            .join(" ")
            .to_lowercase()
    }
}
