//! Sentence graph: sentences linked by shared entities and adjacent discourse relations.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::domain::{load_registry, CauseDirection, Document, RelationSense, Variant};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EntitySource {
    SharedNoun,
    Coref,
}

/// Undirected entity link stored canonically with `i < j`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntityEdge {
    pub i: usize,
    pub j: usize,
    /// Case-folded shared noun, or the earlier coreferent mention.
    pub surface: String,
    pub source: EntitySource,
}

/// Relation between sentence `i` and `i + 1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RelationEdge {
    pub i: usize,
    pub sense: RelationSense,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<CauseDirection>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoherenceGraph {
    pub doc_id: String,
    pub n_sentences: usize,
    /// Sorted by (i, j, surface); unique on that key.
    pub entity_edges: Vec<EntityEdge>,
    /// Sorted by (i, sense); unique on that key.
    pub relation_edges: Vec<RelationEdge>,
}

fn check_sentence(doc: &Document, what: &str, s: usize) -> Result<()> {
    if s == 0 || s > doc.n_sentences() {
        return Err(Error::structural(format!(
            "{}: {what} references sentence {s}, document has {}",
            doc.id,
            doc.n_sentences()
        )));
    }
    Ok(())
}

pub fn extract_entity_edges(doc: &Document) -> Result<Vec<EntityEdge>> {
    let mut by_surface: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for noun in &doc.annotations.nouns {
        check_sentence(doc, "noun", noun.sentence)?;
        let surface = noun.surface.trim().to_lowercase();
        if surface.is_empty() {
            return Err(Error::structural(format!("{}: empty noun surface", doc.id)));
        }
        by_surface.entry(surface).or_default().insert(noun.sentence);
    }

    let mut edges: BTreeMap<(usize, usize, String), EntitySource> = BTreeMap::new();
    for (surface, sentences) in &by_surface {
        let sentences: Vec<usize> = sentences.iter().copied().collect();
        for (a, &i) in sentences.iter().enumerate() {
            for &j in &sentences[a + 1..] {
                edges.insert((i, j, surface.clone()), EntitySource::SharedNoun);
            }
        }
    }

    for link in &doc.annotations.coref_links {
        check_sentence(doc, "coref mention", link.a.sentence)?;
        check_sentence(doc, "coref mention", link.b.sentence)?;
        let (early, late) = if link.a.sentence <= link.b.sentence {
            (&link.a, &link.b)
        } else {
            (&link.b, &link.a)
        };
        if early.sentence == late.sentence {
            continue;
        }
        let tokens = &doc.sentences[early.sentence - 1].tokens;
        if early.span.start >= early.span.end || early.span.end > tokens.len() {
            return Err(Error::structural(format!(
                "{}: coref mention span outside sentence {}",
                doc.id, early.sentence
            )));
        }
        let surface = doc.mention_text(early);
        edges.insert((early.sentence, late.sentence, surface), EntitySource::Coref);
    }

    Ok(edges
        .into_iter()
        .map(|((i, j, surface), source)| EntityEdge { i, j, surface, source })
        .collect())
}

pub fn extract_relation_edges(doc: &Document) -> Result<Vec<RelationEdge>> {
    let registry = load_registry();
    let mut edges: BTreeMap<(usize, RelationSense), Option<CauseDirection>> = BTreeMap::new();
    for rel in &doc.annotations.relations {
        if rel.sentence == 0 || rel.sentence >= doc.n_sentences() {
            return Err(Error::structural(format!(
                "{}: relation at sentence {} does not join two adjacent sentences",
                doc.id, rel.sentence
            )));
        }
        let sense = registry.lookup(&rel.sense, rel.kind)?;
        edges.entry((rel.sentence, sense)).or_insert(rel.direction);
    }
    Ok(edges
        .into_iter()
        .map(|((i, sense), direction)| RelationEdge { i, sense, direction })
        .collect())
}

pub fn build_graph(doc: &Document) -> Result<CoherenceGraph> {
    Ok(CoherenceGraph {
        doc_id: doc.id.clone(),
        n_sentences: doc.n_sentences(),
        entity_edges: extract_entity_edges(doc)?,
        relation_edges: extract_relation_edges(doc)?,
    })
}

impl CoherenceGraph {
    /// Drops the edge families a variant may not see.
    pub fn restrict(&self, variant: Variant) -> CoherenceGraph {
        CoherenceGraph {
            doc_id: self.doc_id.clone(),
            n_sentences: self.n_sentences,
            entity_edges: if variant.uses_entities() {
                self.entity_edges.clone()
            } else {
                Vec::new()
            },
            relation_edges: if variant.uses_relations() {
                self.relation_edges.clone()
            } else {
                Vec::new()
            },
        }
    }

    pub fn n_edges(&self) -> usize {
        self.entity_edges.len() + self.relation_edges.len()
    }

    /// Distinct sentence pairs joined by at least one entity edge.
    pub fn entity_pairs(&self) -> BTreeSet<(usize, usize)> {
        self.entity_edges.iter().map(|e| (e.i, e.j)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_sentences;
        for e in &self.entity_edges {
            if !(1 <= e.i && e.i < e.j && e.j <= n) || e.surface.is_empty() {
                return Err(Error::structural(format!(
                    "entity edge ({}, {}, {:?}) invalid for {n} sentences",
                    e.i, e.j, e.surface
                )));
            }
        }
        for r in &self.relation_edges {
            if r.i == 0 || r.i >= n {
                return Err(Error::structural(format!(
                    "relation edge at {} invalid for {n} sentences",
                    r.i
                )));
            }
        }
        let keys: BTreeSet<_> = self.entity_edges.iter().map(|e| (e.i, e.j, &e.surface)).collect();
        if keys.len() != self.entity_edges.len() {
            return Err(Error::structural("duplicate entity edge"));
        }
        let keys: BTreeSet<_> = self.relation_edges.iter().map(|r| (r.i, &r.sense)).collect();
        if keys.len() != self.relation_edges.len() {
            return Err(Error::structural("duplicate relation edge"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{AnnotationSet, CorefLink, Mention, NounAnnotation, RelationAnnotation, RelationKind, TokenSpan};

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn noun(sentence: usize, start: usize, surface: &str) -> NounAnnotation {
        NounAnnotation {
            sentence,
            span: TokenSpan::new(start, start + 1),
            surface: surface.into(),
        }
    }

    #[test]
    fn no_shared_nouns_no_edges() {
        let ann = AnnotationSet {
            nouns: vec![noun(1, 0, "cat"), noun(2, 0, "dog")],
            ..Default::default()
        };
        let doc = Document::from_tokens("d", "t", None, vec![toks("cat sat"), toks("dog ran")], ann).unwrap();
        assert!(extract_entity_edges(&doc).unwrap().is_empty());
    }

    #[test]
    fn coref_wins_over_shared_noun() {
        let ann = AnnotationSet {
            nouns: vec![noun(1, 0, "Dog"), noun(2, 0, "dog")],
            coref_links: vec![CorefLink {
                a: Mention { sentence: 2, span: TokenSpan::new(0, 1) },
                b: Mention { sentence: 1, span: TokenSpan::new(0, 1) },
            }],
            ..Default::default()
        };
        let doc = Document::from_tokens("d", "t", None, vec![toks("Dog sat"), toks("dog ran")], ann).unwrap();
        let edges = extract_entity_edges(&doc).unwrap();
        assert_eq!(edges.len(), 1);
        assert_eq!(edges[0].surface, "dog");
        assert_eq!(edges[0].source, EntitySource::Coref);
        assert_eq!((edges[0].i, edges[0].j), (1, 2));
    }

    #[test]
    fn same_sentence_coref_is_ignored() {
        let ann = AnnotationSet {
            coref_links: vec![CorefLink {
                a: Mention { sentence: 1, span: TokenSpan::new(0, 1) },
                b: Mention { sentence: 1, span: TokenSpan::new(1, 2) },
            }],
            ..Default::default()
        };
        let doc = Document::from_tokens("d", "t", None, vec![toks("John his"), toks("x")], ann).unwrap();
        assert!(extract_entity_edges(&doc).unwrap().is_empty());
    }

    #[test]
    fn unknown_sense_is_registry_error() {
        let ann = AnnotationSet {
            relations: vec![RelationAnnotation {
                sentence: 1,
                sense: "Foo".into(),
                kind: RelationKind::Explicit,
                direction: None,
            }],
            ..Default::default()
        };
        let doc = Document::from_tokens("d", "t", None, vec![toks("a"), toks("b")], ann).unwrap();
        assert!(matches!(extract_relation_edges(&doc), Err(Error::UnknownSense { .. })));
    }

    #[test]
    fn non_adjacent_relation_is_structural_error() {
        let mut doc = Document::from_tokens("d", "t", None, vec![toks("a"), toks("b")], AnnotationSet::default()).unwrap();
        doc.annotations.relations.push(RelationAnnotation {
            sentence: 2,
            sense: "Cause".into(),
            kind: RelationKind::Implicit,
            direction: None,
        });
        assert!(matches!(extract_relation_edges(&doc), Err(Error::Structural(_))));
    }

    #[test]
    fn multiple_senses_on_one_pair_are_kept() {
        let rel = |sense: &str, kind| RelationAnnotation {
            sentence: 1,
            sense: sense.into(),
            kind,
            direction: None,
        };
        let ann = AnnotationSet {
            relations: vec![
                rel("Cause", RelationKind::Explicit),
                rel("Conjunction", RelationKind::Implicit),
                rel("cause", RelationKind::Explicit),
            ],
            ..Default::default()
        };
        let doc = Document::from_tokens("d", "t", None, vec![toks("a"), toks("b")], ann).unwrap();
        let g = build_graph(&doc).unwrap();
        assert_eq!(g.relation_edges.len(), 2);
        g.validate().unwrap();
    }

    #[test]
    fn single_sentence_graph() {
        let doc = Document::from_tokens("d", "t", None, vec![toks("alone here")], AnnotationSet::default()).unwrap();
        let g = build_graph(&doc).unwrap();
        assert_eq!(g.n_sentences, 1);
        assert_eq!(g.n_edges(), 0);
    }
}
