//! Small hand-built documents for unit tests.

use crate::domain::{
    AnnotationSet, CauseDirection, CoherenceLabel, CorefLink, Document, Mention, NounAnnotation, RelationAnnotation,
    RelationKind, TokenSpan,
};

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

fn rel(sentence: usize, sense: &str, kind: RelationKind, direction: Option<CauseDirection>) -> RelationAnnotation {
    RelationAnnotation {
        sentence,
        sense: sense.into(),
        kind,
        direction,
    }
}

/// The four-sentence airport example.
pub fn airport(label: Option<CoherenceLabel>) -> Document {
    let ann = AnnotationSet {
        nouns: vec![
            noun(1, 0, "John"),
            noun(1, 5, "flight"),
            noun(1, 7, "morning"),
            noun(2, 4, "strike"),
            noun(2, 9, "morning"),
            noun(3, 0, "Buses"),
            noun(3, 5, "roads"),
            noun(4, 8, "airport"),
            noun(4, 12, "strike"),
        ],
        coref_links: vec![CorefLink {
            a: Mention { sentence: 1, span: TokenSpan::new(0, 1) },
            b: Mention { sentence: 4, span: TokenSpan::new(2, 3) },
        }],
        relations: vec![
            rel(1, "Cause", RelationKind::Implicit, Some(CauseDirection::Reason)),
            rel(2, "Instantiation", RelationKind::Implicit, None),
            rel(3, "Cause", RelationKind::Explicit, Some(CauseDirection::Result)),
        ],
    };
    Document::from_tokens(
        "airport",
        "example",
        label,
        vec![
            toks("John was late for his flight this morning ."),
            toks("There was a citywide strike of transport workers that morning ."),
            toks("Buses stopped running and many roads were blocked ."),
            toks("So , he could not get to the airport because of the strike ."),
        ],
        ann,
    )
    .expect("fixture is valid")
}

/// A short document with one shared noun and one relation.
pub fn small(id: &str, label: CoherenceLabel, words: &[&str]) -> Document {
    let ann = AnnotationSet {
        nouns: vec![noun(1, 0, words[0]), noun(3, 1, words[0])],
        relations: vec![rel(2, "Contrast", RelationKind::Explicit, None)],
        ..Default::default()
    };
    Document::from_tokens(
        id,
        "test",
        Some(label),
        vec![
            toks(&format!("{} went {} .", words[0], words[1])),
            toks(&format!("nobody saw {} there", words[2])),
            toks(&format!("then {} left", words[0])),
        ],
        ann,
    )
    .expect("fixture is valid")
}
