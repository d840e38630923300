//! Plain-text tables for CV, per-label and transfer results.

use std::fmt::Write;

use super::cv::{CvReport, TransferReport};
use crate::domain::CoherenceLabel;

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

/// Model x metric, mean (std) in percent.
pub fn cv_table(reports: &[CvReport]) -> String {
    let mut out = String::from("| Model | Acc | Macro-F1 | Train Acc |\n|---|---|---|---|\n");
    for r in reports {
        let s = &r.summary;
        let _ = writeln!(
            out,
            "| {} | {} ({}) | {} ({}) | {} ({}) |",
            r.model,
            pct(s.accuracy.mean),
            pct(s.accuracy.std),
            pct(s.macro_f1.mean),
            pct(s.macro_f1.std),
            pct(s.train_accuracy.mean),
            pct(s.train_accuracy.std),
        );
    }
    out
}

/// Per-label recall and range, one row per model.
pub fn per_label_table(reports: &[CvReport]) -> String {
    let mut out = String::from("| Model | Low | Medium | High | Range |\n|---|---|---|---|---|\n");
    for r in reports {
        let cell = |label: CoherenceLabel| {
            r.summary
                .per_label_accuracy
                .iter()
                .find(|(l, _)| *l == label)
                .map(|(_, m)| pct(m.mean))
                .unwrap_or_else(|| "n/a".into())
        };
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} |",
            r.model,
            cell(CoherenceLabel::Low),
            cell(CoherenceLabel::Medium),
            cell(CoherenceLabel::High),
            pct(r.summary.range.mean),
        );
    }
    out
}

/// Test domain x (model, baseline, delta).
pub fn transfer_table(report: &TransferReport) -> String {
    let mut out = format!(
        "train domain: {}\n| Test domain | {} | {} | Delta |\n|---|---|---|---|\n",
        report.train_tag, report.model, report.baseline
    );
    for row in &report.rows {
        let flag = if row.model.missing_gold.is_empty() {
            String::new()
        } else {
            let names: Vec<&str> = row.model.missing_gold.iter().map(|l| l.as_str()).collect();
            format!(" (no gold: {})", names.join(", "))
        };
        let _ = writeln!(
            out,
            "| {}{} | {} | {} | {:+.2} |",
            row.test_tag,
            flag,
            pct(row.model.accuracy),
            pct(row.baseline.accuracy),
            100.0 * row.delta
        );
    }
    out
}
