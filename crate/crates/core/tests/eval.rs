use std::collections::BTreeMap;

use coherent_core::domain::write_corpus;
use coherent_core::eval::synth::is_rich;
use coherent_core::eval::{
    accuracy, cross_domain, kfold, kfold_with, macro_f1, per_label_report, run_cv, synth_generate, FusionTrainer,
    MajorityTrainer, SynthProfile,
};
use coherent_core::fusion::{ModelConfig, TrainConfig};
use coherent_core::{build_graph, load_registry, CoherenceLabel, RelationKind, Variant};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn label(i: usize) -> CoherenceLabel {
    CoherenceLabel::from_index(i).unwrap()
}

fn random_labels(rng: &mut ChaCha8Rng, n: usize) -> Vec<CoherenceLabel> {
    (0..n).map(|_| label(rng.gen_range(0..3))).collect()
}

#[test]
fn metrics_match_counting_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..1000 {
        let n = rng.gen_range(1..40);
        let preds = random_labels(&mut rng, n);
        let golds = random_labels(&mut rng, n);

        let hits = (0..n).filter(|&k| preds[k] == golds[k]).count();
        assert_eq!(accuracy(&preds, &golds).unwrap(), hits as f64 / n as f64);

        let mut f1_sum = 0.0;
        let mut recalls = Vec::new();
        for c in CoherenceLabel::ALL {
            let tp = (0..n).filter(|&k| preds[k] == c && golds[k] == c).count() as f64;
            let pred_c = preds.iter().filter(|&&p| p == c).count() as f64;
            let gold_c = golds.iter().filter(|&&g| g == c).count() as f64;
            let p = if pred_c > 0.0 { tp / pred_c } else { 0.0 };
            let r = if gold_c > 0.0 { tp / gold_c } else { 0.0 };
            f1_sum += if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
            if gold_c > 0.0 {
                recalls.push(r);
            }
        }
        let f = macro_f1(&preds, &golds).unwrap();
        assert!((f.value - f1_sum / 3.0).abs() < 1e-12);
        assert!(f.value <= 1.0);

        let report = per_label_report(&preds, &golds).unwrap();
        let range = recalls.iter().cloned().fold(f64::MIN, f64::max) - recalls.iter().cloned().fold(f64::MAX, f64::min);
        assert!((report.range - range).abs() < 1e-12);
        let trace: usize = (0..3).map(|c| report.confusion[c][c]).sum();
        let total: usize = report.confusion.iter().flatten().sum();
        assert_eq!(total, n);
        assert_eq!(report.accuracy, trace as f64 / total as f64);
        assert_eq!(report.per_label_accuracy.len(), recalls.len());
    }
}

/// Per-label recalls 0.6667, 0.7899, 0.7788 (10000 gold documents per label).
#[test]
fn range_of_table_recalls() {
    let mut preds = Vec::new();
    let mut golds = Vec::new();
    for (c, hits) in [(0, 6667), (1, 7899), (2, 7788)] {
        for k in 0..10_000 {
            golds.push(label(c));
            preds.push(if k < hits { label(c) } else { label((c + 1) % 3) });
        }
    }
    let r = per_label_report(&preds, &golds).unwrap();
    assert!((r.range - 0.1232).abs() < 1e-9, "{}", r.range);
}

fn labeled_docs(labels: &[CoherenceLabel]) -> Vec<coherent_core::Document> {
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            coherent_core::Document::from_tokens(
                format!("doc{i:04}"),
                "t",
                Some(l),
                vec![vec!["w".to_string()]],
                Default::default(),
            )
            .unwrap()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn folds_are_balanced_and_stratified(seed in any::<u64>(), n in 4usize..120, k in 2usize..11) {
        prop_assume!(k <= n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let docs = labeled_docs(&random_labels(&mut rng, n));
        let plan = kfold(&docs, k, seed).unwrap();
        let sizes = plan.fold_sizes();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        for c in CoherenceLabel::ALL {
            let global = docs.iter().filter(|d| d.label == Some(c)).count() as f64 / k as f64;
            for f in 0..k {
                let (_, test) = plan.split(&docs, f);
                let count = test.iter().filter(|d| d.label == Some(c)).count() as f64;
                prop_assert!((count - global).abs() <= 1.0);
            }
        }
        prop_assert_eq!(&plan, &kfold(&docs, k, seed).unwrap());
        let plain = kfold_with(&docs, k, seed, false).unwrap();
        let plain_sizes = plain.fold_sizes();
        prop_assert!(plain_sizes.iter().max().unwrap() - plain_sizes.iter().min().unwrap() <= 1);
    }
}

#[test]
fn cv_with_deterministic_model_is_reproducible() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let docs = labeled_docs(&random_labels(&mut rng, 50));
    let plan = kfold(&docs, 5, 3).unwrap();
    assert_eq!(run_cv(&docs, &plan, &MajorityTrainer).unwrap(), run_cv(&docs, &plan, &MajorityTrainer).unwrap());

    let data = synth_generate(30, 1, &SynthProfile::default()).unwrap();
    let plan = kfold(&data, 3, 0).unwrap();
    let trainer = FusionTrainer::new(
        ModelConfig::toy(8, 2, 1),
        TrainConfig { epochs: 2, batch_size: 8, ..Default::default() },
    );
    let a = run_cv(&data, &plan, &trainer).unwrap();
    let mut b = run_cv(&data, &plan, &trainer).unwrap();
    // Wall-clock time is the only field allowed to differ.
    for (fa, fb) in a.folds.iter().zip(b.folds.iter_mut()) {
        for (ea, eb) in fa.history.iter().zip(fb.history.iter_mut()) {
            eb.wall_ms = ea.wall_ms;
        }
    }
    assert_eq!(a, b);
}

#[test]
fn synthetic_corpus_is_byte_identical_per_seed() {
    let p = SynthProfile::default();
    let bytes = |seed| {
        let mut buf = Vec::new();
        write_corpus(&mut buf, &synth_generate(50, seed, &p).unwrap()).unwrap();
        buf
    };
    assert_eq!(bytes(9), bytes(9));
    assert_ne!(bytes(9), bytes(10));
}

#[test]
fn synthetic_sense_marginals_follow_priors() {
    let docs = synth_generate(10_000, 21, &SynthProfile::default()).unwrap();
    let reg = load_registry();
    for kind in [RelationKind::Explicit, RelationKind::Implicit] {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        let mut total = 0usize;
        for d in &docs {
            for r in d.annotations.relations.iter().filter(|r| r.kind == kind) {
                *counts.entry(reg.lookup(&r.sense, kind).unwrap().name()).or_default() += 1;
                total += 1;
            }
        }
        for (sense, prior) in reg.priors(kind) {
            let freq = *counts.get(sense.name()).unwrap_or(&0) as f64 / total as f64;
            assert!((freq - prior).abs() <= 0.03, "{kind} {}: {freq:.4} vs {prior:.4}", sense.name());
        }
    }
}

#[test]
fn synthetic_labels_follow_generator_contract() {
    for d in synth_generate(300, 4, &SynthProfile::for_domain("news")).unwrap() {
        let g = build_graph(&d).unwrap();
        let pairs = g.entity_pairs();
        let adjacent = (1..d.n_sentences()).filter(|&i| pairs.contains(&(i, i + 1))).count();
        match d.label.unwrap() {
            CoherenceLabel::High => {
                assert_eq!(adjacent, d.n_sentences() - 1);
                assert!(g.relation_edges.iter().all(|r| is_rich(&r.sense)));
            }
            CoherenceLabel::Low => assert!(g.entity_edges.is_empty()),
            CoherenceLabel::Medium => {}
        }
        assert_eq!(d.domain_tag, "news");
    }
}

fn toy_trainer() -> FusionTrainer {
    FusionTrainer::new(ModelConfig::toy(32, 2, 1), TrainConfig::default())
}

#[test]
fn full_model_beats_text_only_in_cv() {
    let data = synth_generate(300, 17, &SynthProfile::default()).unwrap();
    let plan = kfold(&data, 3, 0).unwrap();
    let full = run_cv(&data, &plan, &toy_trainer()).unwrap();
    let text = run_cv(&data, &plan, &toy_trainer().with_variant(Variant::TextOnly)).unwrap();
    assert!(
        full.summary.accuracy.mean >= text.summary.accuracy.mean + 0.05,
        "{} vs {}",
        full.summary.accuracy.mean,
        text.summary.accuracy.mean
    );
}

#[test]
fn full_model_transfers_better_than_text_only() {
    let mut data = synth_generate(300, 5, &SynthProfile::for_domain("clinton")).unwrap();
    data.extend(synth_generate(150, 6, &SynthProfile::for_domain("enron")).unwrap());
    let report = cross_domain(
        "clinton",
        &["enron".to_string()],
        &data,
        &toy_trainer(),
        &toy_trainer().with_variant(Variant::TextOnly),
    )
    .unwrap();
    let row = &report.rows[0];
    assert!(row.model.accuracy > row.baseline.accuracy, "{row:?}");
    assert!(row.delta > 0.0);
    let table = coherent_core::eval::report::transfer_table(&report);
    assert!(table.contains("enron"));
}
