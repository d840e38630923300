mod common;

use std::collections::BTreeSet;
use std::fs;

use coherent_core::build_graph;
use coherent_core::prompt::{extract_triples, prompt_for, relation_label, PromptVariant, DEFAULT_CHAR_BUDGET};
use proptest::prelude::*;

use common::{airport, fixture, random_document};

#[test]
fn airport_triples() {
    let triples: Vec<String> = extract_triples(&build_graph(&airport()).unwrap())
        .iter()
        .map(|t| t.to_string())
        .collect();
    assert_eq!(
        triples,
        [
            "(s1, entity, s2)",
            "(s1, reason, s2)",
            "(s1, entity, s4)",
            "(s2, instantiation, s3)",
            "(s2, entity, s4)",
            "(s3, result, s4)"
        ]
    );
}

#[test]
fn airport_prompts_match_golden_files() {
    let doc = airport();
    let g = build_graph(&doc).unwrap();
    for variant in PromptVariant::ALL {
        let p = prompt_for(&doc, &g, variant, DEFAULT_CHAR_BUDGET).unwrap();
        let golden = fs::read_to_string(fixture("golden").join(p.file_name())).unwrap();
        assert_eq!(p.text, golden, "{variant}");
    }
}

#[test]
fn text_only_prompt_has_no_triples() {
    let doc = airport();
    let p = prompt_for(&doc, &build_graph(&doc).unwrap(), PromptVariant::TextOnly, DEFAULT_CHAR_BUDGET).unwrap();
    assert!(p.triples_used.is_empty());
    assert!(!p.text.contains("(s1,"));
}

#[test]
fn variants_filter_triples() {
    let doc = airport();
    let g = build_graph(&doc).unwrap();
    let labels = |v| -> BTreeSet<String> {
        prompt_for(&doc, &g, v, DEFAULT_CHAR_BUDGET).unwrap().triples_used.into_iter().map(|t| t.label).collect()
    };
    assert_eq!(labels(PromptVariant::TextEnty), BTreeSet::from(["entity".to_string()]));
    assert!(!labels(PromptVariant::TextRel).contains("entity"));
    assert_eq!(labels(PromptVariant::Full), labels(PromptVariant::FullWithExplanation));
}

#[test]
fn tight_budget_drops_trailing_triples() {
    let doc = airport();
    let g = build_graph(&doc).unwrap();
    let full = prompt_for(&doc, &g, PromptVariant::Full, DEFAULT_CHAR_BUDGET).unwrap();
    let p = prompt_for(&doc, &g, PromptVariant::Full, full.char_count() - 10).unwrap();
    let t = p.truncation.unwrap();
    assert_eq!(t.dropped_triples, 1);
    assert_eq!(p.triples_used, full.triples_used[..5]);
    assert!(prompt_for(&doc, &g, PromptVariant::Full, 50).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    /// Walk sentence -> edge -> sentence over the bipartite incidence structure.
    #[test]
    fn triples_are_two_hop_paths(seed in any::<u64>()) {
        let g = build_graph(&random_document(seed, 8)).unwrap();
        let mut incidence: Vec<(Vec<usize>, String)> = Vec::new();
        for e in &g.entity_edges {
            incidence.push((vec![e.i, e.j], "entity".into()));
        }
        for r in &g.relation_edges {
            incidence.push((vec![r.i, r.i + 1], relation_label(r)));
        }
        let mut oracle = BTreeSet::new();
        for i in 1..=g.n_sentences {
            for (ends, label) in &incidence {
                if !ends.contains(&i) {
                    continue;
                }
                for &j in ends {
                    if j > i {
                        oracle.insert((i, label.clone(), j));
                    }
                }
            }
        }
        let got: BTreeSet<_> = extract_triples(&g).into_iter().map(|t| (t.i, t.label, t.j)).collect();
        prop_assert_eq!(got, oracle);
    }
}
