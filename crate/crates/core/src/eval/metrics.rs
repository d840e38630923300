//! Accuracy, macro-F1 and per-label reports over three-way coherence labels.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::CoherenceLabel;
use crate::error::{Error, Result};

/// Rows are gold labels, columns predictions.
pub type Confusion = [[usize; 3]; 3];

fn check(preds: &[CoherenceLabel], golds: &[CoherenceLabel]) -> Result<()> {
    if preds.len() != golds.len() {
        return Err(Error::Contract(format!(
            "{} predictions for {} gold labels",
            preds.len(),
            golds.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::Contract("no predictions to score".into()));
    }
    Ok(())
}

pub fn confusion(preds: &[CoherenceLabel], golds: &[CoherenceLabel]) -> Result<Confusion> {
    check(preds, golds)?;
    let mut m = [[0usize; 3]; 3];
    for (p, g) in preds.iter().zip(golds) {
        m[g.index()][p.index()] += 1;
    }
    Ok(m)
}

pub fn accuracy(preds: &[CoherenceLabel], golds: &[CoherenceLabel]) -> Result<f64> {
    check(preds, golds)?;
    let hits = preds.iter().zip(golds).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / preds.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroF1 {
    pub value: f64,
    pub per_class: [f64; 3],
    /// Classes absent from both predictions and golds; they count as F1 = 0.
    pub degenerate: Vec<CoherenceLabel>,
}

fn f1_from(m: &Confusion) -> MacroF1 {
    let mut per_class = [0.0; 3];
    let mut degenerate = Vec::new();
    for c in 0..3 {
        let tp = m[c][c];
        let fp: usize = (0..3).filter(|&g| g != c).map(|g| m[g][c]).sum();
        let fn_: usize = (0..3).filter(|&p| p != c).map(|p| m[c][p]).sum();
        if tp + fp + fn_ == 0 {
            degenerate.push(CoherenceLabel::from_index(c).unwrap());
            continue;
        }
        per_class[c] = 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64;
    }
    MacroF1 {
        value: per_class.iter().sum::<f64>() / 3.0,
        per_class,
        degenerate,
    }
}

pub fn macro_f1(preds: &[CoherenceLabel], golds: &[CoherenceLabel]) -> Result<MacroF1> {
    Ok(f1_from(&confusion(preds, golds)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class_f1: [f64; 3],
    /// Recall per gold label; labels without gold examples are omitted.
    pub per_label_accuracy: BTreeMap<CoherenceLabel, f64>,
    /// Highest minus lowest per-label accuracy.
    pub range: f64,
    pub confusion: Confusion,
    /// Labels with no gold examples (recall undefined).
    pub missing_gold: Vec<CoherenceLabel>,
    pub f1_degenerate: Vec<CoherenceLabel>,
}

pub fn per_label_report(preds: &[CoherenceLabel], golds: &[CoherenceLabel]) -> Result<EvalReport> {
    let m = confusion(preds, golds)?;
    let n = preds.len();
    let f1 = f1_from(&m);
    let mut per_label_accuracy = BTreeMap::new();
    let mut missing_gold = Vec::new();
    for label in CoherenceLabel::ALL {
        let c = label.index();
        let support: usize = m[c].iter().sum();
        if support == 0 {
            missing_gold.push(label);
        } else {
            per_label_accuracy.insert(label, m[c][c] as f64 / support as f64);
        }
    }
    let range = if per_label_accuracy.is_empty() {
        0.0
    } else {
        let max = per_label_accuracy.values().cloned().fold(f64::MIN, f64::max);
        let min = per_label_accuracy.values().cloned().fold(f64::MAX, f64::min);
        max - min
    };
    let trace: usize = (0..3).map(|c| m[c][c]).sum();
    Ok(EvalReport {
        n,
        accuracy: trace as f64 / n as f64,
        macro_f1: f1.value,
        per_class_f1: f1.per_class,
        per_label_accuracy,
        range,
        confusion: m,
        missing_gold,
        f1_degenerate: f1.degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use CoherenceLabel::*;

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[Low, Medium, High], &[Low, Medium, High]).unwrap(), 1.0);
        assert!((accuracy(&[Low, Medium, High], &[Low, High, High]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(accuracy(&[Low], &[Low, High]).is_err());
        assert!(accuracy(&[], &[]).is_err());
    }

    #[test]
    fn macro_f1_hand_example() {
        let f = macro_f1(&[Low, Medium, Medium, High], &[Low, Low, Medium, High]).unwrap();
        assert!((f.per_class[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((f.per_class[1] - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(f.per_class[2], 1.0);
        assert!((f.value - 0.7778).abs() < 1e-4);
        assert!(f.degenerate.is_empty());
    }

    #[test]
    fn majority_predictor_is_penalized() {
        let golds = [vec![Low; 8], vec![Medium, High]].concat();
        let preds = vec![Low; 10];
        let acc = accuracy(&preds, &golds).unwrap();
        let f1 = macro_f1(&preds, &golds).unwrap().value;
        assert!(f1 < acc, "{f1} vs {acc}");
    }

    #[test]
    fn single_class_fixture_flags_degenerate() {
        let f = macro_f1(&[High, High], &[High, High]).unwrap();
        assert_eq!(f.degenerate, vec![Low, Medium]);
        assert!((f.value - 1.0 / 3.0).abs() < 1e-15);
        let r = per_label_report(&[High, High], &[High, High]).unwrap();
        assert_eq!(r.missing_gold, vec![Low, Medium]);
        assert_eq!(r.range, 0.0);
    }

    #[test]
    fn perfect_predictions_have_zero_range() {
        let g = [Low, Medium, High, High];
        let r = per_label_report(&g, &g).unwrap();
        assert_eq!(r.range, 0.0);
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.macro_f1, 1.0);
    }
}
