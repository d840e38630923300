use serde::{Deserialize, Serialize};

use crate::domain::Variant;
use crate::error::{Error, Result};
use crate::linearize::DEFAULT_MAX_ELEMENTS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Pooling {
    #[default]
    MeanSentences,
    FirstSentence,
}

impl std::str::FromStr for Pooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "meansentences" | "mean" => Ok(Pooling::MeanSentences),
            "firstsentence" | "first" => Ok(Pooling::FirstSentence),
            _ => Err(Error::Config(format!("unknown pooling {s:?}; expected mean-sentences or first-sentence"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub d_ffn: usize,
    pub dropout_rate: f64,
    pub n_classes: usize,
    /// Relative distances are clipped to `±max_relative_distance`.
    pub max_relative_distance: usize,
    pub seed: u64,
    /// Divide attention scores by `sqrt(d_head)`.
    pub scale_scores: bool,
    /// Apply a ReLU after the `W_p` projection of the relative position embedding.
    pub pe_relu: bool,
    /// One `u`, `v` pair shared by every head of every layer instead of one per head.
    pub share_uv: bool,
    pub pooling: Pooling,
    pub token_buckets: usize,
    pub entity_buckets: usize,
    pub train_token_embed: bool,
    pub max_elements: usize,
    /// Which edge families reach the model.
    pub variant: Variant,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_model: 256,
            n_heads: 8,
            n_layers: 2,
            d_ffn: 1024,
            dropout_rate: 0.1,
            n_classes: 3,
            max_relative_distance: 128,
            seed: 0,
            scale_scores: true,
            pe_relu: false,
            share_uv: false,
            pooling: Pooling::MeanSentences,
            token_buckets: 4096,
            entity_buckets: 1024,
            train_token_embed: true,
            max_elements: DEFAULT_MAX_ELEMENTS,
            variant: Variant::Full,
        }
    }
}

impl ModelConfig {
    /// Small configuration for tests and desk-scale experiments.
    pub fn toy(d_model: usize, n_heads: usize, n_layers: usize) -> Self {
        ModelConfig {
            d_model,
            n_heads,
            n_layers,
            d_ffn: 2 * d_model,
            token_buckets: 512,
            entity_buckets: 128,
            max_relative_distance: 32,
            ..ModelConfig::default()
        }
    }

    pub fn d_head(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("d_model", self.d_model),
            ("n_heads", self.n_heads),
            ("n_layers", self.n_layers),
            ("d_ffn", self.d_ffn),
            ("token_buckets", self.token_buckets),
            ("entity_buckets", self.entity_buckets),
            ("max_elements", self.max_elements),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be at least 1")));
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::Config(format!(
                "d_model ({}) is not divisible by n_heads ({})",
                self.d_model, self.n_heads
            )));
        }
        if !self.d_model.is_multiple_of(2) {
            return Err(Error::Config(format!("d_model ({}) must be even for sinusoids", self.d_model)));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!("dropout_rate {} outside [0, 1)", self.dropout_rate)));
        }
        if self.n_classes != 3 {
            return Err(Error::Config(format!("n_classes must be 3, got {}", self.n_classes)));
        }
        Ok(())
    }

    /// Human-readable list of fields that differ, used when a checkpoint and
    /// requested flags disagree.
    pub fn diff(&self, other: &ModelConfig) -> Vec<String> {
        let a = serde_json::to_value(self).expect("config serializes");
        let b = serde_json::to_value(other).expect("config serializes");
        let (a, b) = (a.as_object().unwrap(), b.as_object().unwrap());
        a.iter()
            .filter(|(k, v)| b.get(*k) != Some(*v))
            .map(|(k, v)| format!("{k}: {v} vs {}", b.get(k).cloned().unwrap_or_default()))
            .collect()
    }
}
