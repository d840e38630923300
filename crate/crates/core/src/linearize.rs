//! Flattening a [`CoherenceGraph`] into a sequence of 2D-positioned elements.
//!
//! Sentence `k` sits at `(k, k)`, an entity edge between sentences `i < j` at
//! `(i, j)`, and a relation between `i` and `i + 1` at `(i, i + 1)`. Sentences
//! come first in document order; edges follow sorted by
//! `(start, end, kind, payload)` with entities before relations.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::{CauseDirection, RelationSense};
use crate::error::{Error, Result};
use crate::graph::{CoherenceGraph, EntityEdge, EntitySource, RelationEdge};

pub const DEFAULT_MAX_ELEMENTS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ElementKind {
    Sentence,
    Entity,
    Relation,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Payload {
    Sentence(usize),
    Entity {
        surface: String,
        source: EntitySource,
    },
    Relation {
        sense: RelationSense,
        direction: Option<CauseDirection>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FlatElement {
    pub payload: Payload,
    pub start: usize,
    pub end: usize,
}

impl FlatElement {
    pub fn kind(&self) -> ElementKind {
        match self.payload {
            Payload::Sentence(_) => ElementKind::Sentence,
            Payload::Entity { .. } => ElementKind::Entity,
            Payload::Relation { .. } => ElementKind::Relation,
        }
    }

    pub fn is_sentence(&self) -> bool {
        matches!(self.payload, Payload::Sentence(_))
    }

    pub fn sentence(k: usize) -> Self {
        FlatElement {
            payload: Payload::Sentence(k),
            start: k,
            end: k,
        }
    }

    fn sort_key(&self) -> (usize, usize, ElementKind, &Payload) {
        (self.start, self.end, self.kind(), &self.payload)
    }

    /// Whether the element touches sentence `k` at either end of its span.
    pub fn touches(&self, k: usize) -> bool {
        self.start == k || self.end == k
    }
}

impl From<&EntityEdge> for FlatElement {
    fn from(e: &EntityEdge) -> Self {
        FlatElement {
            payload: Payload::Entity {
                surface: e.surface.clone(),
                source: e.source,
            },
            start: e.i,
            end: e.j,
        }
    }
}

impl From<&RelationEdge> for FlatElement {
    fn from(r: &RelationEdge) -> Self {
        FlatElement {
            payload: Payload::Relation {
                sense: r.sense.clone(),
                direction: r.direction,
            },
            start: r.i,
            end: r.i + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlatSequence {
    pub doc_id: String,
    pub n_sentences: usize,
    pub elements: Vec<FlatElement>,
}

impl FlatSequence {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_sentences;
        if self.elements.len() < n {
            return Err(Error::structural("sequence shorter than its sentence count"));
        }
        for (k, el) in self.elements.iter().enumerate() {
            let ok = match &el.payload {
                Payload::Sentence(s) => k < n && *s == k + 1 && el.start == *s && el.end == *s,
                Payload::Entity { surface, .. } => k >= n && el.start < el.end && !surface.is_empty(),
                Payload::Relation { .. } => k >= n && el.end == el.start + 1,
            };
            if !ok || el.start == 0 || el.end > n {
                return Err(Error::structural(format!(
                    "element {k} ({:?} at ({}, {})) violates the flat layout",
                    el.kind(),
                    el.start,
                    el.end
                )));
            }
        }
        let tail = &self.elements[n..];
        if tail.windows(2).any(|w| w[0].sort_key() >= w[1].sort_key()) {
            return Err(Error::structural("edge elements out of canonical order"));
        }
        Ok(())
    }
}

pub fn linearize(graph: &CoherenceGraph) -> FlatSequence {
    let mut edges: Vec<FlatElement> = graph
        .entity_edges
        .iter()
        .map(FlatElement::from)
        .chain(graph.relation_edges.iter().map(FlatElement::from))
        .collect();
    edges.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    let mut elements: Vec<FlatElement> = (1..=graph.n_sentences).map(FlatElement::sentence).collect();
    elements.extend(edges);
    FlatSequence {
        doc_id: graph.doc_id.clone(),
        n_sentences: graph.n_sentences,
        elements,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Truncation {
    pub dropped_entities: usize,
}

/// Linearizes with a hard cap on sequence length. Entity elements with the
/// widest span go first (later canonical position breaks ties); relation and
/// sentence elements are never dropped, so a graph whose sentences and
/// relations alone exceed the cap is an error.
pub fn linearize_capped(graph: &CoherenceGraph, max_elements: usize) -> Result<(FlatSequence, Truncation)> {
    let mut seq = linearize(graph);
    let excess = seq.len().saturating_sub(max_elements);
    if excess == 0 {
        return Ok((seq, Truncation::default()));
    }
    let mut entities: Vec<usize> = (seq.n_sentences..seq.len())
        .filter(|&k| seq.elements[k].kind() == ElementKind::Entity)
        .collect();
    if entities.len() < excess {
        return Err(Error::structural(format!(
            "{}: {} sentence and relation elements exceed the cap of {max_elements}",
            graph.doc_id,
            seq.len() - entities.len()
        )));
    }
    entities.sort_by_key(|&k| {
        let el = &seq.elements[k];
        (std::cmp::Reverse(el.end - el.start), std::cmp::Reverse(k))
    });
    let mut drop: Vec<usize> = entities[..excess].to_vec();
    drop.sort_unstable();
    for k in drop.into_iter().rev() {
        seq.elements.remove(k);
    }
    Ok((seq, Truncation { dropped_entities: excess }))
}

/// Rebuilds the graph a sequence was flattened from.
pub fn delinearize(seq: &FlatSequence) -> Result<CoherenceGraph> {
    seq.validate()?;
    let mut entity_edges = Vec::new();
    let mut relation_edges = Vec::new();
    for el in &seq.elements[seq.n_sentences..] {
        match &el.payload {
            Payload::Entity { surface, source } => entity_edges.push(EntityEdge {
                i: el.start,
                j: el.end,
                surface: surface.clone(),
                source: *source,
            }),
            Payload::Relation { sense, direction } => relation_edges.push(RelationEdge {
                i: el.start,
                sense: sense.clone(),
                direction: *direction,
            }),
            Payload::Sentence(_) => unreachable!("validated"),
        }
    }
    entity_edges.sort();
    relation_edges.sort();
    Ok(CoherenceGraph {
        doc_id: seq.doc_id.clone(),
        n_sentences: seq.n_sentences,
        entity_edges,
        relation_edges,
    })
}

impl fmt::Display for FlatSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut n_ent = 0;
        let mut n_rel = 0;
        let names: Vec<String> = self
            .elements
            .iter()
            .map(|el| match &el.payload {
                Payload::Sentence(k) => format!("s{k}"),
                Payload::Entity { surface, .. } => {
                    n_ent += 1;
                    format!("e{n_ent}:{surface}")
                }
                Payload::Relation { sense, .. } => {
                    n_rel += 1;
                    format!("r{n_rel}:{}", sense.render())
                }
            })
            .collect();
        let width = names.iter().map(String::len).max().unwrap_or(0).max(5);
        let row = |f: &mut fmt::Formatter<'_>, head: &str, cells: Vec<String>| -> fmt::Result {
            write!(f, "{head:<6}")?;
            for c in cells {
                write!(f, " {c:>width$}")?;
            }
            writeln!(f)
        };
        row(f, "elem", names.clone())?;
        row(f, "start", self.elements.iter().map(|e| e.start.to_string()).collect())?;
        row(f, "end", self.elements.iter().map(|e| e.end.to_string()).collect())
    }
}
