//! Cross-validation and cross-domain transfer runs.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::kfold::FoldPlan;
use super::metrics::{per_label_report, EvalReport};
use crate::domain::{CoherenceLabel, Document, Variant};
use crate::error::{Error, Result};
use crate::fusion::{train, EpochMetrics, FusionModel, ModelConfig, TrainConfig};

pub trait Classifier {
    fn predict(&self, doc: &Document) -> Result<CoherenceLabel>;
}

impl Classifier for FusionModel {
    fn predict(&self, doc: &Document) -> Result<CoherenceLabel> {
        FusionModel::predict(self, doc)
    }
}

pub struct Fitted {
    pub classifier: Box<dyn Classifier>,
    pub history: Vec<EpochMetrics>,
}

/// Builds a fresh classifier from a training split.
pub trait Trainer {
    fn name(&self) -> String;
    fn fit(&self, train: &[Document]) -> Result<Fitted>;
}

#[derive(Debug, Clone)]
pub struct FusionTrainer {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl FusionTrainer {
    pub fn new(model: ModelConfig, train: TrainConfig) -> Self {
        FusionTrainer { model, train }
    }

    pub fn with_variant(&self, variant: Variant) -> Self {
        FusionTrainer {
            model: self.model.clone().with_variant(variant),
            train: self.train.clone(),
        }
    }
}

impl Trainer for FusionTrainer {
    fn name(&self) -> String {
        self.model.variant.name().to_string()
    }

    fn fit(&self, train_docs: &[Document]) -> Result<Fitted> {
        let model = FusionModel::new(self.model.clone())?;
        let outcome = train(model, train_docs, &self.train)?;
        Ok(Fitted {
            classifier: Box::new(outcome.model),
            history: outcome.epochs,
        })
    }
}

/// Always predicts one label.
#[derive(Debug, Clone, Copy)]
pub struct Constant(pub CoherenceLabel);

impl Classifier for Constant {
    fn predict(&self, _doc: &Document) -> Result<CoherenceLabel> {
        Ok(self.0)
    }
}

/// Predicts the most frequent training label (ties go to the lower label).
#[derive(Debug, Clone, Copy, Default)]
pub struct MajorityTrainer;

impl Trainer for MajorityTrainer {
    fn name(&self) -> String {
        "Majority".into()
    }

    fn fit(&self, train_docs: &[Document]) -> Result<Fitted> {
        let golds = labels(train_docs)?;
        let mut counts = [0usize; 3];
        for g in golds {
            counts[g.index()] += 1;
        }
        let best = (0..3).max_by_key(|&c| (counts[c], std::cmp::Reverse(c))).unwrap();
        Ok(Fitted {
            classifier: Box::new(Constant(CoherenceLabel::from_index(best).unwrap())),
            history: Vec::new(),
        })
    }
}

fn labels(docs: &[Document]) -> Result<Vec<CoherenceLabel>> {
    docs.iter()
        .map(|d| d.label.ok_or_else(|| Error::Contract(format!("{}: document has no label", d.id))))
        .collect()
}

pub fn evaluate(classifier: &dyn Classifier, docs: &[Document]) -> Result<EvalReport> {
    let golds = labels(docs)?;
    let preds = docs.iter().map(|d| classifier.predict(d)).collect::<Result<Vec<_>>>()?;
    per_label_report(&preds, &golds)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample (n - 1) standard deviation; 0 for a single value.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> MeanStd {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        MeanStd { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_train: usize,
    pub test: EvalReport,
    /// Eval-mode accuracy on the fold's own training split.
    pub train_accuracy: f64,
    pub history: Vec<EpochMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub accuracy: MeanStd,
    pub macro_f1: MeanStd,
    pub range: MeanStd,
    /// Per-label recall, averaged over folds where the label occurs.
    pub per_label_accuracy: Vec<(CoherenceLabel, MeanStd)>,
    pub train_accuracy: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub model: String,
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<FoldResult>,
    pub summary: CvSummary,
}

fn summarize(folds: &[FoldResult]) -> CvSummary {
    let col = |f: &dyn Fn(&FoldResult) -> f64| MeanStd::of(&folds.iter().map(f).collect::<Vec<_>>());
    let per_label_accuracy = CoherenceLabel::ALL
        .into_iter()
        .filter_map(|label| {
            let vals: Vec<f64> = folds
                .iter()
                .filter_map(|f| f.test.per_label_accuracy.get(&label).copied())
                .collect();
            (!vals.is_empty()).then(|| (label, MeanStd::of(&vals)))
        })
        .collect();
    CvSummary {
        accuracy: col(&|f| f.test.accuracy),
        macro_f1: col(&|f| f.test.macro_f1),
        range: col(&|f| f.test.range),
        per_label_accuracy,
        train_accuracy: col(&|f| f.train_accuracy),
    }
}

/// One fresh model per fold, trained on the other k - 1 folds.
pub fn run_cv(dataset: &[Document], plan: &FoldPlan, trainer: &dyn Trainer) -> Result<CvReport> {
    labels(dataset)?;
    let mut folds = Vec::with_capacity(plan.k);
    for fold in 0..plan.k {
        let (train_refs, test_refs) = plan.split(dataset, fold);
        let train_docs: Vec<Document> = train_refs.into_iter().cloned().collect();
        let test_docs: Vec<Document> = test_refs.into_iter().cloned().collect();
        if test_docs.is_empty() || train_docs.is_empty() {
            return Err(Error::Contract(format!("fold {fold} has an empty split")));
        }
        let fitted = trainer.fit(&train_docs)?;
        let test = evaluate(fitted.classifier.as_ref(), &test_docs)?;
        let train_accuracy = evaluate(fitted.classifier.as_ref(), &train_docs)?.accuracy;
        folds.push(FoldResult {
            fold,
            n_train: train_docs.len(),
            test,
            train_accuracy,
            history: fitted.history,
        });
    }
    Ok(CvReport {
        model: trainer.name(),
        k: plan.k,
        seed: plan.seed,
        summary: summarize(&folds),
        folds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferRow {
    pub test_tag: String,
    pub model: EvalReport,
    pub baseline: EvalReport,
    /// Model accuracy minus baseline accuracy.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub train_tag: String,
    pub model: String,
    pub baseline: String,
    pub rows: Vec<TransferRow>,
}

pub fn domain_tags(dataset: &[Document]) -> BTreeSet<String> {
    dataset.iter().map(|d| d.domain_tag.clone()).collect()
}

/// Trains `trainer` and `baseline` on `train_tag` documents and evaluates both
/// on every test tag. A test tag equal to the train tag scores the training
/// documents themselves.
pub fn cross_domain(
    train_tag: &str,
    test_tags: &[String],
    dataset: &[Document],
    trainer: &dyn Trainer,
    baseline: &dyn Trainer,
) -> Result<TransferReport> {
    let tags = domain_tags(dataset);
    for tag in std::iter::once(train_tag).chain(test_tags.iter().map(String::as_str)) {
        if !tags.contains(tag) {
            return Err(Error::UnknownTag(format!(
                "{tag:?} (known: {})",
                tags.iter().cloned().collect::<Vec<_>>().join(", ")
            )));
        }
    }
    let subset = |tag: &str| -> Vec<Document> { dataset.iter().filter(|d| d.domain_tag == tag).cloned().collect() };
    let train_docs = subset(train_tag);
    let fitted = trainer.fit(&train_docs)?;
    let fitted_base = baseline.fit(&train_docs)?;
    let mut rows = Vec::new();
    for tag in test_tags {
        let docs = subset(tag);
        let model = evaluate(fitted.classifier.as_ref(), &docs)?;
        let base = evaluate(fitted_base.classifier.as_ref(), &docs)?;
        rows.push(TransferRow {
            test_tag: tag.clone(),
            delta: model.accuracy - base.accuracy,
            model,
            baseline: base,
        });
    }
    Ok(TransferReport {
        train_tag: train_tag.to_string(),
        model: trainer.name(),
        baseline: baseline.name(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::AnnotationSet;
    use crate::eval::kfold::kfold;
    use CoherenceLabel::*;

    fn doc(i: usize, label: CoherenceLabel, tag: &str) -> Document {
        Document::from_tokens(format!("{tag}{i:03}"), tag, Some(label), vec![vec!["w".into()]], AnnotationSet::default())
            .unwrap()
    }

    struct Fixed(CoherenceLabel);
    impl Trainer for Fixed {
        fn name(&self) -> String {
            "Fixed".into()
        }
        fn fit(&self, _: &[Document]) -> Result<Fitted> {
            Ok(Fitted {
                classifier: Box::new(Constant(self.0)),
                history: vec![],
            })
        }
    }

    #[test]
    fn constant_model_accuracy_is_label_fraction() {
        let labels = [Low, Low, Low, Medium, High, Low, Medium, Low, High, Low, Low];
        let data: Vec<Document> = labels.iter().enumerate().map(|(i, &l)| doc(i, l, "d")).collect();
        let plan = kfold(&data, 3, 5).unwrap();
        let report = run_cv(&data, &plan, &Fixed(Low)).unwrap();
        let expected: Vec<f64> = (0..3)
            .map(|f| {
                let (_, test) = plan.split(&data, f);
                test.iter().filter(|d| d.label == Some(Low)).count() as f64 / test.len() as f64
            })
            .collect();
        let mean = expected.iter().sum::<f64>() / 3.0;
        assert!((report.summary.accuracy.mean - mean).abs() < 1e-12);
    }

    #[test]
    fn identical_folds_have_zero_std() {
        let data = vec![doc(0, Low, "d"), doc(1, Low, "d"), doc(2, High, "d"), doc(3, High, "d")];
        let plan = kfold(&data, 2, 0).unwrap();
        let report = run_cv(&data, &plan, &MajorityTrainer).unwrap();
        assert_eq!(report.summary.accuracy.std, 0.0);
        assert_eq!(report.summary.accuracy.mean, 0.5);
    }

    #[test]
    fn sample_std() {
        let s = MeanStd::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn cross_domain_unknown_tag_and_degenerate_support() {
        let mut data: Vec<Document> = (0..4).map(|i| doc(i, Low, "a")).collect();
        data.extend((0..3).map(|i| doc(i, High, "b")));
        let err = cross_domain("a", &["zzz".into()], &data, &MajorityTrainer, &Fixed(Low)).unwrap_err();
        assert!(matches!(err, Error::UnknownTag(_)));
        let rep = cross_domain("a", &["a".into(), "b".into()], &data, &MajorityTrainer, &Fixed(High)).unwrap();
        assert_eq!(rep.rows[0].model.accuracy, 1.0);
        assert_eq!(rep.rows[1].model.accuracy, 0.0);
        assert_eq!(rep.rows[1].model.missing_gold, vec![Low, Medium]);
        assert_eq!(rep.rows[1].delta, -1.0);
    }
}
