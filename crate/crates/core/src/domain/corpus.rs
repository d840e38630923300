//! Line-delimited JSON corpus format: one document object per line.
//!
//! ```text
//! {"id":"d1","domain_tag":"yahoo","label":"high",
//!  "sentences":[{"text":"John left .","tokens":["John","left","."]}],
//!  "annotations":{
//!    "nouns":[{"sentence":1,"start":0,"end":1,"surface":"John"}],
//!    "coref_links":[{"a":{"sentence":1,"start":0,"end":1},"b":{"sentence":2,"start":0,"end":1}}],
//!    "relations":[{"sentence":1,"sense":"Cause","kind":"implicit","direction":"reason"}]}}
//! ```
//!
//! `label` is either a label name (`"low"`, `"medium"`, `"high"`), a raw score
//! object `{"raw": 4, "scheme": "cohesentia5"}`, or absent for unlabeled text.
//! Sentence indices are implicit (1-based list position); token spans are
//! half-open. Writing always emits the canonical label name.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{map_raw_score, AnnotationSet, CoherenceLabel, Document, ScoreScheme, Sentence};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelField {
    Named(CoherenceLabel),
    Raw { raw: i64, scheme: ScoreScheme },
}

impl LabelField {
    pub fn resolve(&self) -> Result<CoherenceLabel> {
        match *self {
            LabelField::Named(l) => Ok(l),
            LabelField::Raw { raw, scheme } => map_raw_score(scheme, raw),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub text: String,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub id: String,
    #[serde(default)]
    pub domain_tag: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<LabelField>,
    pub sentences: Vec<SentenceRecord>,
    #[serde(default)]
    pub annotations: AnnotationSet,
}

impl TryFrom<DocumentRecord> for Document {
    type Error = Error;

    fn try_from(rec: DocumentRecord) -> Result<Self> {
        let label = rec.label.as_ref().map(LabelField::resolve).transpose()?;
        let doc = Document {
            id: rec.id,
            sentences: rec
                .sentences
                .into_iter()
                .enumerate()
                .map(|(k, s)| Sentence {
                    index: k + 1,
                    text: s.text,
                    tokens: s.tokens,
                })
                .collect(),
            label,
            domain_tag: rec.domain_tag,
            annotations: rec.annotations,
        };
        doc.validate()?;
        Ok(doc)
    }
}

impl From<&Document> for DocumentRecord {
    fn from(doc: &Document) -> Self {
        DocumentRecord {
            id: doc.id.clone(),
            domain_tag: doc.domain_tag.clone(),
            label: doc.label.map(LabelField::Named),
            sentences: doc
                .sentences
                .iter()
                .map(|s| SentenceRecord {
                    text: s.text.clone(),
                    tokens: s.tokens.clone(),
                })
                .collect(),
            annotations: doc.annotations.clone(),
        }
    }
}

impl Document {
    pub fn from_json_line(line: &str) -> Result<Self> {
        let rec: DocumentRecord = serde_json::from_str(line)?;
        Document::try_from(rec)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&DocumentRecord::from(self)).expect("document records always serialize")
    }
}

/// Reads a corpus; blank lines are skipped. Errors carry the 1-based line number.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc = Document::from_json_line(&line).map_err(|e| Error::CorpusLine {
            line: k + 1,
            source: Box::new(e),
        })?;
        docs.push(doc);
    }
    Ok(docs)
}

pub fn write_corpus<W: Write>(mut writer: W, docs: &[Document]) -> Result<()> {
    for doc in docs {
        writeln!(writer, "{}", doc.to_json_line())?;
    }
    Ok(())
}
