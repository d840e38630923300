//! Coherence assessment from sentences, shared entities and discourse relations.
//!
//! The pipeline: an annotated [`Document`] becomes a [`CoherenceGraph`]
//! (sentences linked by entity and discourse-relation edges). The graph is
//! either flattened into a 2D-positioned [`FlatSequence`] and classified by the
//! [`fusion`] transformer, or decomposed into triples and rendered as an LLM
//! prompt by [`prompt`]. [`eval`] holds metrics, cross-validation and the
//! synthetic corpus generator.

pub mod domain;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod graph;
pub mod linearize;
pub mod prompt;
#[cfg(test)]
pub(crate) mod testutil;

pub use domain::{
    load_registry, map_raw_score, CoherenceLabel, Document, RelationKind, RelationSense, ScoreScheme, Variant,
};
pub use error::{Error, Result};
pub use graph::{build_graph, CoherenceGraph};
pub use linearize::{linearize, FlatElement, FlatSequence};
