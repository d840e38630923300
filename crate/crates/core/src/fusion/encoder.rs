//! Element embeddings: hash-bucket sentence encoder and bucket lookups.

use ndarray::{Array1, Array2};

/// Frozen external sentence encoder (e.g. a pretrained LM with mean pooling).
/// Its output bypasses the built-in token table and receives no gradient.
pub trait SentenceEncoder: Send + Sync {
    fn dim(&self) -> usize;
    fn encode(&self, tokens: &[String]) -> Array1<f64>;
}

/// 64-bit FNV-1a; stable across platforms and releases.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub fn bucket(text: &str, buckets: usize) -> usize {
    (fnv1a(text.to_lowercase().as_bytes()) % buckets as u64) as usize
}

pub fn token_buckets(tokens: &[String], buckets: usize) -> Vec<usize> {
    tokens.iter().map(|t| bucket(t, buckets)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    pub vector: Array1<f64>,
    /// Set when the token list was empty and a zero vector was returned.
    pub empty: bool,
}

/// Mean of the hashed token rows of `table`.
pub fn toy_sentence_encoder(tokens: &[String], table: &Array2<f64>) -> Encoded {
    let d = table.ncols();
    if tokens.is_empty() {
        return Encoded {
            vector: Array1::zeros(d),
            empty: true,
        };
    }
    let mut v = Array1::zeros(d);
    for b in token_buckets(tokens, table.nrows()) {
        v += &table.row(b);
    }
    v /= tokens.len() as f64;
    Encoded { vector: v, empty: false }
}
