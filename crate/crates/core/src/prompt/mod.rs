//! Graph-to-prompt linearization: sentence-pair triples and prompt rendering.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{CauseDirection, Document, Variant};
use crate::error::{Error, Result};
use crate::graph::{CoherenceGraph, RelationEdge};

pub const ENTITY_LABEL: &str = "entity";
pub const DEFAULT_CHAR_BUDGET: usize = 16_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TripleKind {
    Entity,
    Relation,
}

/// `(s_i, label, s_j)` with `i < j`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub i: usize,
    pub j: usize,
    pub kind: TripleKind,
    pub label: String,
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(s{}, {}, s{})", self.i, self.label, self.j)
    }
}

/// Lowercased sense name; Cause renders as `reason` or `result` when the
/// annotation says which argument is the cause.
pub fn relation_label(edge: &RelationEdge) -> String {
    match (edge.sense.name(), edge.direction) {
        ("Cause", Some(CauseDirection::Reason)) => "reason".to_string(),
        ("Cause", Some(CauseDirection::Result)) => "result".to_string(),
        _ => edge.sense.render(),
    }
}

/// One entity triple per linked sentence pair and one relation triple per
/// relation edge, ordered by `(i, j, entity before relation, label)`.
pub fn extract_triples(graph: &CoherenceGraph) -> Vec<Triple> {
    let mut triples: BTreeSet<(usize, usize, TripleKind, String)> = BTreeSet::new();
    for e in &graph.entity_edges {
        triples.insert((e.i, e.j, TripleKind::Entity, ENTITY_LABEL.to_string()));
    }
    let mut out: Vec<Triple> = triples
        .into_iter()
        .map(|(i, j, kind, label)| Triple { i, j, kind, label })
        .collect();
    out.extend(graph.relation_edges.iter().map(|r| Triple {
        i: r.i,
        j: r.i + 1,
        kind: TripleKind::Relation,
        label: relation_label(r),
    }));
    out.retain(|t| t.i < t.j);
    out.sort();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PromptVariant {
    TextOnly,
    TextEnty,
    TextRel,
    Full,
    FullWithExplanation,
}

impl PromptVariant {
    pub const ALL: [PromptVariant; 5] = [
        PromptVariant::TextOnly,
        PromptVariant::TextEnty,
        PromptVariant::TextRel,
        PromptVariant::Full,
        PromptVariant::FullWithExplanation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PromptVariant::TextOnly => "TextOnly",
            PromptVariant::TextEnty => "TextEnty",
            PromptVariant::TextRel => "TextRel",
            PromptVariant::Full => "Full",
            PromptVariant::FullWithExplanation => "FullWithExplanation",
        }
    }

    pub fn allows(self, kind: TripleKind) -> bool {
        match self {
            PromptVariant::TextOnly => false,
            PromptVariant::TextEnty => kind == TripleKind::Entity,
            PromptVariant::TextRel => kind == TripleKind::Relation,
            PromptVariant::Full | PromptVariant::FullWithExplanation => true,
        }
    }

    pub fn filter(self, triples: &[Triple]) -> Vec<Triple> {
        triples.iter().filter(|t| self.allows(t.kind)).cloned().collect()
    }

    fn instruction(self) -> &'static str {
        match self {
            PromptVariant::TextOnly => {
                "Below is a text whose sentences are numbered s1, s2, and so on. \
                 Assess how coherent the text is.\n\
                 Base your judgment only on the textual content of the sentences.\n"
            }
            PromptVariant::TextEnty => {
                "Below is a text whose sentences are numbered s1, s2, and so on. \
                 Assess how coherent the text is.\n\
                 Base your judgment on the content of the sentences and on the entity links listed below.\n\
                 A triple (si, entity, sj) means that sentences si and sj mention the same entity.\n"
            }
            PromptVariant::TextRel => {
                "Below is a text whose sentences are numbered s1, s2, and so on. \
                 Assess how coherent the text is.\n\
                 Base your judgment on the content of the sentences and on the discourse relations listed below.\n\
                 A triple (si, relation, sj) means that the named discourse relation holds between sentences si and sj.\n"
            }
            PromptVariant::Full | PromptVariant::FullWithExplanation => {
                "Below is a text whose sentences are numbered s1, s2, and so on. \
                 Assess how coherent the text is.\n\
                 Base your judgment on the content of the sentences and on the entity and discourse relation patterns listed below.\n\
                 A triple (si, entity, sj) means that sentences si and sj mention the same entity.\n\
                 A triple (si, relation, sj) means that the named discourse relation holds between sentences si and sj.\n"
            }
        }
    }

    fn question(self) -> &'static str {
        match self {
            PromptVariant::FullWithExplanation => {
                "Question: What is the coherence level of the text? \
                 Answer with one of: low, medium, high. \
                 Then provide a brief explanation for your judgment.\n"
            }
            _ => {
                "Question: What is the coherence level of the text? \
                 Answer with one of: low, medium, high.\n"
            }
        }
    }
}

impl From<Variant> for PromptVariant {
    fn from(v: Variant) -> Self {
        match v {
            Variant::TextOnly => PromptVariant::TextOnly,
            Variant::TextEnty => PromptVariant::TextEnty,
            Variant::TextRel => PromptVariant::TextRel,
            Variant::Full => PromptVariant::Full,
        }
    }
}

impl fmt::Display for PromptVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PromptVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PromptVariant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown prompt variant {s:?}")))
    }
}

/// Raised when a prompt had to drop triples to fit the character budget.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTruncation {
    pub original_chars: usize,
    pub dropped_triples: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptDocument {
    pub doc_id: String,
    pub variant: PromptVariant,
    pub text: String,
    pub triples_used: Vec<Triple>,
    pub truncation: Option<PromptTruncation>,
}

impl PromptDocument {
    pub fn char_count(&self) -> usize {
        self.text.chars().count()
    }

    pub fn file_name(&self) -> String {
        format!("{}.{}.txt", self.doc_id, self.variant)
    }
}

fn assemble(doc: &Document, triples: &[Triple], variant: PromptVariant) -> String {
    let mut text = String::new();
    text.push_str(variant.instruction());
    text.push_str("\nText:\n");
    for s in &doc.sentences {
        text.push_str(&format!("s{}: {}\n", s.index, s.text.trim()));
    }
    if variant != PromptVariant::TextOnly {
        text.push_str("\nTriples:\n");
        if triples.is_empty() {
            text.push_str("(none)\n");
        }
        for t in triples {
            text.push_str(&format!("{t}\n"));
        }
    }
    text.push('\n');
    text.push_str(variant.question());
    text.push_str("Answer:\n");
    text
}

/// Renders one prompt. Triples must already match the variant; if the text
/// exceeds `char_budget`, trailing triples are dropped and the truncation is
/// recorded on the result.
pub fn render_prompt(
    doc: &Document,
    triples: &[Triple],
    variant: PromptVariant,
    char_budget: usize,
) -> Result<PromptDocument> {
    let n = doc.n_sentences();
    for t in triples {
        if t.i == 0 || t.j > n || t.i >= t.j {
            return Err(Error::structural(format!(
                "{}: triple {t} out of range for {n} sentences",
                doc.id
            )));
        }
        if !variant.allows(t.kind) {
            return Err(Error::Contract(format!("triple {t} not allowed in the {variant} variant")));
        }
    }
    let mut used = triples.to_vec();
    let mut text = assemble(doc, &used, variant);
    let original_chars = text.chars().count();
    let mut truncation = None;
    if original_chars > char_budget {
        while !used.is_empty() && text.chars().count() > char_budget {
            used.pop();
            text = assemble(doc, &used, variant);
        }
        if text.chars().count() > char_budget {
            return Err(Error::Contract(format!(
                "{}: prompt needs {} characters without triples, budget is {char_budget}",
                doc.id,
                text.chars().count()
            )));
        }
        truncation = Some(PromptTruncation {
            original_chars,
            dropped_triples: triples.len() - used.len(),
        });
    }
    Ok(PromptDocument {
        doc_id: doc.id.clone(),
        variant,
        text,
        triples_used: used,
        truncation,
    })
}

/// Builds the triples for `graph`, filters them for `variant` and renders.
pub fn prompt_for(
    doc: &Document,
    graph: &CoherenceGraph,
    variant: PromptVariant,
    char_budget: usize,
) -> Result<PromptDocument> {
    let triples = variant.filter(&extract_triples(graph));
    render_prompt(doc, &triples, variant, char_budget)
}
