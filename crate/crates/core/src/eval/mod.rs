//! Metrics, fold planning, cross-validation, transfer runs and synthetic data.

pub mod cv;
pub mod kfold;
pub mod metrics;
pub mod report;
pub mod synth;

pub use cv::{
    cross_domain, domain_tags, evaluate, run_cv, Classifier, Constant, CvReport, CvSummary, Fitted, FoldResult, FusionTrainer,
    MajorityTrainer, MeanStd, Trainer, TransferReport, TransferRow,
};
pub use kfold::{kfold, kfold_with, FoldPlan};
pub use metrics::{accuracy, confusion, macro_f1, per_label_report, Confusion, EvalReport, MacroF1};
pub use synth::{synth_generate, SynthProfile, Vocabulary};
