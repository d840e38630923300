//! Relative position embeddings over 2D (start, end) element positions.

use ndarray::{s, Array1, Array2, ArrayView2};

use crate::linearize::FlatElement;

/// Fixed sinusoid: component `2k` is `sin(pos / 10000^(2k/d))`, `2k+1` the cosine.
pub fn sinusoid(distance: i64, d_model: usize) -> Array1<f64> {
    let mut out = Array1::zeros(d_model);
    fill_sinusoid(distance, out.as_slice_mut().unwrap());
    out
}

fn fill_sinusoid(distance: i64, out: &mut [f64]) {
    let d = out.len();
    let pos = distance as f64;
    for k in 0..d.div_ceil(2) {
        let angle = pos / 10000f64.powf((2 * k) as f64 / d as f64);
        out[2 * k] = angle.sin();
        if 2 * k + 1 < d {
            out[2 * k + 1] = angle.cos();
        }
    }
}

/// The four clipped distances start-start, start-end, end-start, end-end.
pub fn relative_distances(a: &FlatElement, b: &FlatElement, clip: usize) -> [i64; 4] {
    let c = clip as i64;
    let (sa, ea, sb, eb) = (a.start as i64, a.end as i64, b.start as i64, b.end as i64);
    [sa - sb, sa - eb, ea - sb, ea - eb].map(|x| x.clamp(-c, c))
}

/// Standalone relative position encoder: `concat(p(d1), .., p(d4)) · W_p`,
/// optionally followed by a ReLU.
#[derive(Debug, Clone)]
pub struct PositionEncoder {
    pub d_model: usize,
    pub max_relative_distance: usize,
    /// `(4·d_model) × d_model`.
    pub w_p: Array2<f64>,
    pub relu: bool,
}

impl PositionEncoder {
    pub fn relative_pe(&self, a: &FlatElement, b: &FlatElement) -> Array1<f64> {
        let d = self.d_model;
        let dists = relative_distances(a, b, self.max_relative_distance);
        let mut concat = Array1::zeros(4 * d);
        for (k, dist) in dists.into_iter().enumerate() {
            concat.slice_mut(s![k * d..(k + 1) * d]).assign(&sinusoid(dist, d));
        }
        let mut pe = concat.dot(&self.w_p);
        if self.relu {
            pe.mapv_inplace(|x| x.max(0.0));
        }
        pe
    }
}

/// Per-sequence lookup tables: for each of the four distance slots, the
/// projection `p(dist) · W_p[slot]` for every distance that can occur.
pub(crate) struct PositionTables {
    pub span: i64,
    pub clip: i64,
    pub sin: Array2<f64>,
    pub proj: [Array2<f64>; 4],
}

impl PositionTables {
    pub fn new(n_sentences: usize, max_relative_distance: usize, w_p: ArrayView2<f64>) -> Self {
        let d = w_p.ncols();
        let clip = max_relative_distance as i64;
        let span = (n_sentences.saturating_sub(1) as i64).min(clip);
        let m = (2 * span + 1) as usize;
        let mut sin = Array2::zeros((m, d));
        for (row, dist) in (-span..=span).enumerate() {
            fill_sinusoid(dist, sin.row_mut(row).into_slice().unwrap());
        }
        let proj = std::array::from_fn(|k| sin.dot(&w_p.slice(s![k * d..(k + 1) * d, ..])));
        PositionTables { span, clip, sin, proj }
    }

    pub fn row_indices(&self, a: &FlatElement, b: &FlatElement) -> [usize; 4] {
        relative_distances(a, b, self.clip as usize).map(|x| (x.clamp(-self.span, self.span) + self.span) as usize)
    }
}
