//! Visible matrix and masked softmax.
//!
//! Element `i` may attend to `j` when they are the same element, both
//! sentences, or one is sentence `k` and the other an entity or relation
//! whose span starts or ends at `k`.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::linearize::{FlatElement, FlatSequence, Payload};

/// Finite stand-in for negative infinity.
pub const MASKED: f64 = -1e9;

fn links(sentence: &FlatElement, other: &FlatElement) -> bool {
    match (&sentence.payload, &other.payload) {
        (Payload::Sentence(k), Payload::Entity { .. } | Payload::Relation { .. }) => other.touches(*k),
        _ => false,
    }
}

pub fn is_visible(seq: &FlatSequence, i: usize, j: usize) -> bool {
    let (a, b) = (&seq.elements[i], &seq.elements[j]);
    i == j || (a.is_sentence() && b.is_sentence()) || links(a, b) || links(b, a)
}

pub fn visible_matrix(seq: &FlatSequence) -> Array2<f64> {
    let n = seq.len();
    Array2::from_shape_fn((n, n), |(i, j)| if is_visible(seq, i, j) { 0.0 } else { MASKED })
}

/// For each row, the column indices it may attend to (ascending).
pub(crate) fn visible_lists(seq: &FlatSequence) -> Vec<Vec<usize>> {
    let n = seq.len();
    (0..n).map(|i| (0..n).filter(|&j| is_visible(seq, i, j)).collect()).collect()
}

/// Row-wise `softmax(A + M)`.
pub fn masked_softmax(scores: ArrayView2<f64>, mask: ArrayView2<f64>) -> Result<Array2<f64>> {
    if scores.dim() != mask.dim() {
        return Err(Error::structural(format!(
            "scores {:?} and mask {:?} differ in shape",
            scores.dim(),
            mask.dim()
        )));
    }
    let mut out = &scores + &mask;
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        if mask.row(i).iter().all(|&m| m <= MASKED) {
            return Err(Error::Contract(format!("row {i} of the visible matrix is fully masked")));
        }
        let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        row.mapv_inplace(|x| (x - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    Ok(out)
}
