//! Synthetic corpora with a controllable split between graph and text signal.
//!
//! Every document has one relation per adjacent sentence pair. High documents
//! chain their entities (each adjacent pair shares a noun or a pronoun
//! coreferent) and draw all relations from a "rich" sense set; Low documents
//! share no nouns and draw from the complementary "poor" set. Medium documents
//! have exactly one of the two cues. The rich sets carry about half of each
//! kind's prior mass and half of the documents are rich, so the generated
//! sense marginals track the registry priors.
//!
//! Text carries a weak label cue: each filler token comes from a per-label word
//! pool with probability `text_signal`. Nouns are shared by all domains; filler
//! and cue words depend on the domain name.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{
    load_registry, AnnotationSet, CauseDirection, CoherenceLabel, CorefLink, Document, Mention, NounAnnotation,
    RelationAnnotation, RelationKind, RelationSense, TokenSpan,
};
use crate::error::{Error, Result};
use crate::fusion::encoder::fnv1a;

const RICH_EXPLICIT: [&str; 6] = ["Conjunction", "Cause", "Instantiation", "Level-of-detail", "Purpose", "Manner"];
const RICH_IMPLICIT: [&str; 3] = ["Cause", "Conjunction", "Asynchronous"];

const N_NOUNS: usize = 40;
const N_FILLER: usize = 120;
const N_CUE: usize = 12;
pub const PRONOUN: &str = "it";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthProfile {
    pub domain: String,
    pub min_sentences: usize,
    pub max_sentences: usize,
    /// Non-noun tokens per sentence, before the final period.
    pub filler_tokens: usize,
    /// Probability that a filler token is a label cue word.
    pub text_signal: f64,
    /// Fraction of relations that are explicit.
    pub explicit_fraction: f64,
    /// Probability that a chained noun is replaced by a coreferent pronoun.
    pub coref_rate: f64,
}

impl Default for SynthProfile {
    fn default() -> Self {
        SynthProfile {
            domain: "synth".into(),
            min_sentences: 4,
            max_sentences: 7,
            filler_tokens: 6,
            text_signal: 0.03,
            explicit_fraction: 0.4,
            coref_rate: 0.25,
        }
    }
}

impl SynthProfile {
    pub fn for_domain(domain: &str) -> Self {
        SynthProfile {
            domain: domain.into(),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_sentences < 2 || self.max_sentences < self.min_sentences {
            return Err(Error::Config(format!(
                "sentence range {}..={} must start at 2 or more",
                self.min_sentences, self.max_sentences
            )));
        }
        if self.max_sentences > N_NOUNS / 2 {
            return Err(Error::Config(format!("at most {} sentences supported", N_NOUNS / 2)));
        }
        for (name, p) in [
            ("text_signal", self.text_signal),
            ("explicit_fraction", self.explicit_fraction),
            ("coref_rate", self.coref_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.domain.is_empty() {
            return Err(Error::Config("domain must be non-empty".into()));
        }
        Ok(())
    }
}

/// Whether a sense belongs to the rich set for its kind.
pub fn is_rich(sense: &RelationSense) -> bool {
    match sense.kind() {
        RelationKind::Explicit => RICH_EXPLICIT.contains(&sense.name()),
        RelationKind::Implicit => RICH_IMPLICIT.contains(&sense.name()),
    }
}

/// Coherence cues a label implies: (chained entities, rich relations).
fn cues(label: CoherenceLabel, rng: &mut ChaCha8Rng) -> (bool, bool) {
    match label {
        CoherenceLabel::High => (true, true),
        CoherenceLabel::Low => (false, false),
        CoherenceLabel::Medium => {
            if rng.gen_bool(0.5) {
                (true, false)
            } else {
                (false, true)
            }
        }
    }
}

struct SenseTable {
    senses: Vec<RelationSense>,
    cumulative: Vec<f64>,
}

impl SenseTable {
    fn new(kind: RelationKind, rich: bool) -> Self {
        let mut senses = Vec::new();
        let mut cumulative = Vec::new();
        let mut acc = 0.0;
        for (s, p) in load_registry().priors(kind) {
            if is_rich(s) == rich {
                acc += p;
                senses.push(s.clone());
                cumulative.push(acc);
            }
        }
        for c in &mut cumulative {
            *c /= acc;
        }
        SenseTable { senses, cumulative }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> RelationSense {
        let u: f64 = rng.gen();
        let k = self.cumulative.partition_point(|&c| c <= u).min(self.senses.len() - 1);
        self.senses[k].clone()
    }
}

fn pseudo_word(rng: &mut ChaCha8Rng, syllables: usize) -> String {
    const C: &[u8] = b"bdfgklmnprstvz";
    const V: &[u8] = b"aeiou";
    let mut w = String::new();
    for _ in 0..syllables {
        w.push(C[rng.gen_range(0..C.len())] as char);
        w.push(V[rng.gen_range(0..V.len())] as char);
    }
    w
}

fn word_pool(rng: &mut ChaCha8Rng, n: usize, syllables: usize, taken: &mut BTreeSet<String>) -> Vec<String> {
    let mut pool = Vec::with_capacity(n);
    while pool.len() < n {
        let w = pseudo_word(rng, syllables);
        if w != PRONOUN && taken.insert(w.clone()) {
            pool.push(w);
        }
    }
    pool
}

/// Word pools for one domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    pub nouns: Vec<String>,
    pub filler: Vec<String>,
    /// Indexed by label.
    pub cues: [Vec<String>; 3],
}

impl Vocabulary {
    pub fn for_domain(domain: &str) -> Self {
        let mut taken = BTreeSet::new();
        let mut noun_rng = ChaCha8Rng::seed_from_u64(fnv1a(b"nouns"));
        let nouns = word_pool(&mut noun_rng, N_NOUNS, 3, &mut taken);
        let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(domain.as_bytes()));
        let filler = word_pool(&mut rng, N_FILLER, 2, &mut taken);
        let cues = [
            word_pool(&mut rng, N_CUE, 2, &mut taken),
            word_pool(&mut rng, N_CUE, 2, &mut taken),
            word_pool(&mut rng, N_CUE, 2, &mut taken),
        ];
        Vocabulary { nouns, filler, cues }
    }
}

struct SentencePlan {
    nouns: Vec<String>,
    pronoun: bool,
}

pub fn synth_generate(n_docs: usize, seed: u64, profile: &SynthProfile) -> Result<Vec<Document>> {
    if n_docs == 0 {
        return Err(Error::Config("n_docs must be at least 1".into()));
    }
    profile.validate()?;
    let vocab = Vocabulary::for_domain(&profile.domain);
    let tables = [
        [SenseTable::new(RelationKind::Explicit, false), SenseTable::new(RelationKind::Explicit, true)],
        [SenseTable::new(RelationKind::Implicit, false), SenseTable::new(RelationKind::Implicit, true)],
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(profile.domain.as_bytes()));
    (0..n_docs)
        .map(|i| {
            let label = CoherenceLabel::from_index(i % 3).unwrap();
            generate_one(i, label, profile, &vocab, &tables, &mut rng)
        })
        .collect()
}

fn generate_one(
    index: usize,
    label: CoherenceLabel,
    profile: &SynthProfile,
    vocab: &Vocabulary,
    tables: &[[SenseTable; 2]; 2],
    rng: &mut ChaCha8Rng,
) -> Result<Document> {
    let (chained, rich) = cues(label, rng);
    let n = rng.gen_range(profile.min_sentences..=profile.max_sentences);

    // Chained: sentence k holds nouns t_k and t_{k+1}. Otherwise 2n distinct nouns.
    let picked: Vec<String> = vocab
        .nouns
        .choose_multiple(rng, if chained { n + 1 } else { 2 * n })
        .cloned()
        .collect();
    let plans: Vec<SentencePlan> = (0..n)
        .map(|k| {
            let nouns = if chained {
                vec![picked[k].clone(), picked[k + 1].clone()]
            } else {
                vec![picked[2 * k].clone(), picked[2 * k + 1].clone()]
            };
            SentencePlan {
                nouns,
                pronoun: k > 0 && rng.gen_bool(profile.coref_rate),
            }
        })
        .collect();

    let mut ann = AnnotationSet::default();
    let mut sentences = Vec::with_capacity(n);
    // Position of each sentence's second noun, for coreference anchors.
    let mut second_noun_pos: Vec<usize> = Vec::with_capacity(n);
    for (k, plan) in plans.iter().enumerate() {
        let s = k + 1;
        let mut tokens: Vec<String> = (0..profile.filler_tokens)
            .map(|_| {
                let pool = if rng.gen_bool(profile.text_signal) {
                    &vocab.cues[label.index()]
                } else {
                    &vocab.filler
                };
                pool.choose(rng).unwrap().clone()
            })
            .collect();
        // In a chained document the first noun repeats the previous sentence's
        // second noun; a pronoun takes its place and carries a coref link.
        let first = if plan.pronoun && chained {
            PRONOUN.to_string()
        } else {
            plan.nouns[0].clone()
        };
        if plan.pronoun && !chained {
            tokens.push(PRONOUN.to_string());
        }
        tokens.push(first.clone());
        tokens.push(plan.nouns[1].clone());
        tokens.shuffle(rng);
        let pos = |w: &str, tokens: &[String]| tokens.iter().position(|t| t == w).unwrap();
        let p1 = pos(&first, &tokens);
        let p2 = pos(&plan.nouns[1], &tokens);
        if first == PRONOUN {
            let prev = k - 1;
            ann.coref_links.push(CorefLink {
                a: Mention {
                    sentence: s - 1,
                    span: TokenSpan::new(second_noun_pos[prev], second_noun_pos[prev] + 1),
                },
                b: Mention {
                    sentence: s,
                    span: TokenSpan::new(p1, p1 + 1),
                },
            });
        } else {
            ann.nouns.push(NounAnnotation {
                sentence: s,
                span: TokenSpan::new(p1, p1 + 1),
                surface: first.clone(),
            });
        }
        ann.nouns.push(NounAnnotation {
            sentence: s,
            span: TokenSpan::new(p2, p2 + 1),
            surface: plan.nouns[1].clone(),
        });
        second_noun_pos.push(p2);
        tokens.push(".".into());
        sentences.push(tokens);
    }

    for i in 1..n {
        let kind = if rng.gen_bool(profile.explicit_fraction) {
            RelationKind::Explicit
        } else {
            RelationKind::Implicit
        };
        let table = &tables[(kind == RelationKind::Implicit) as usize][rich as usize];
        let sense = table.sample(rng);
        let direction = (sense.name() == "Cause").then(|| {
            if rng.gen_bool(0.5) {
                CauseDirection::Reason
            } else {
                CauseDirection::Result
            }
        });
        ann.relations.push(RelationAnnotation {
            sentence: i,
            sense: sense.name().to_string(),
            kind,
            direction,
        });
    }

    Document::from_tokens(
        format!("{}-{index:05}", profile.domain),
        profile.domain.clone(),
        Some(label),
        sentences,
        ann,
    )
}
