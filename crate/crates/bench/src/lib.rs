//! Shared inputs for the benchmarks.

use coherent_core::eval::{synth_generate, SynthProfile};
use coherent_core::fusion::{FusionModel, ModelConfig};
use coherent_core::Document;

/// Labeled synthetic documents with entity chains and relations.
pub fn documents(n: usize) -> Vec<Document> {
    synth_generate(n, 17, &SynthProfile::default()).expect("default profile is valid")
}

pub fn toy_model() -> FusionModel {
    FusionModel::new(ModelConfig::toy(32, 2, 1)).expect("toy config is valid")
}

pub fn default_model() -> FusionModel {
    FusionModel::new(ModelConfig::default()).expect("default config is valid")
}
