#![allow(dead_code)]

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use coherent_core::domain::{
    read_corpus, AnnotationSet, CauseDirection, CorefLink, Mention, NounAnnotation, RelationAnnotation, TokenSpan,
};
use coherent_core::{load_registry, CoherenceLabel, Document};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn airport() -> Document {
    let f = File::open(fixture("airport.jsonl")).unwrap();
    read_corpus(BufReader::new(f)).unwrap().remove(0)
}

const WORDS: [&str; 10] = ["cat", "Cat", "dog", "tree", "river", "Tree", "stone", "he", "she", "bank"];

/// Random annotated document with 1..=max_sentences sentences.
pub fn random_document(seed: u64, max_sentences: usize) -> Document {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=max_sentences);
    let sentences: Vec<Vec<String>> = (0..n)
        .map(|_| {
            (0..rng.gen_range(2..=6))
                .map(|_| WORDS.choose(&mut rng).unwrap().to_string())
                .collect()
        })
        .collect();
    let mention = |rng: &mut ChaCha8Rng| {
        let s = rng.gen_range(1..=n);
        let t = rng.gen_range(0..sentences[s - 1].len());
        Mention {
            sentence: s,
            span: TokenSpan::new(t, t + 1),
        }
    };
    let mut ann = AnnotationSet::default();
    for _ in 0..rng.gen_range(0..=2 * n) {
        let m = mention(&mut rng);
        ann.nouns.push(NounAnnotation {
            sentence: m.sentence,
            span: m.span,
            surface: sentences[m.sentence - 1][m.span.start].clone(),
        });
    }
    for _ in 0..rng.gen_range(0..=n / 2 + 1) {
        let a = mention(&mut rng);
        let b = mention(&mut rng);
        ann.coref_links.push(CorefLink { a, b });
    }
    if n > 1 {
        let senses: Vec<_> = load_registry().all().cloned().collect();
        for _ in 0..rng.gen_range(0..=n + 1) {
            let sense = senses.choose(&mut rng).unwrap();
            let direction = match rng.gen_range(0..3) {
                0 => Some(CauseDirection::Reason),
                1 => Some(CauseDirection::Result),
                _ => None,
            };
            ann.relations.push(RelationAnnotation {
                sentence: rng.gen_range(1..n),
                sense: sense.name().to_string(),
                kind: sense.kind(),
                direction,
            });
        }
    }
    let label = CoherenceLabel::from_index(rng.gen_range(0..3));
    Document::from_tokens(format!("rand{seed}"), "random", label, sentences, ann).unwrap()
}

pub fn strip_annotations(doc: &Document) -> Document {
    let mut d = doc.clone();
    d.annotations = AnnotationSet::default();
    d
}
