//! Position-aware attention scores for a single head, written directly from
//! the score definition. The model's batched path computes the same scores
//! through a cheaper factorization; this form is the reference.

use ndarray::{Array1, Array2};

use super::position::PositionEncoder;
use crate::error::{Error, Result};
use crate::linearize::FlatSequence;

#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    /// `d_model × d_head` projections.
    pub w_q: Array2<f64>,
    pub w_k: Array2<f64>,
    pub w_v: Array2<f64>,
    pub w_r: Array2<f64>,
    /// Global content bias.
    pub u: Array1<f64>,
    /// Global position bias.
    pub v: Array1<f64>,
}

/// `A_ij = q_i·k_j + q_i·r_ij + u·k_j + v·r_ij`, with `q = e W_q`, `k = e W_k`
/// and `r_ij = pe(i, j) W_r`; multiplied by `1/sqrt(d_head)` when `scale`.
pub fn attention_scores(
    seq: &FlatSequence,
    embeddings: &Array2<f64>,
    head: &HeadParams,
    enc: &PositionEncoder,
    scale: bool,
) -> Result<Array2<f64>> {
    let n = seq.len();
    if embeddings.nrows() != n || embeddings.ncols() != head.w_q.nrows() || enc.d_model != head.w_r.nrows() {
        return Err(Error::structural(format!(
            "embeddings {:?} do not match {n} elements and head input width {}",
            embeddings.dim(),
            head.w_q.nrows()
        )));
    }
    let q = embeddings.dot(&head.w_q);
    let k = embeddings.dot(&head.w_k);
    let factor = if scale { 1.0 / (head.w_q.ncols() as f64).sqrt() } else { 1.0 };
    let mut scores = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let r = enc.relative_pe(&seq.elements[i], &seq.elements[j]).dot(&head.w_r);
            let (qi, kj) = (q.row(i), k.row(j));
            scores[[i, j]] = factor * (qi.dot(&kj) + qi.dot(&r) + head.u.dot(&kj) + head.v.dot(&r));
        }
    }
    Ok(scores)
}
