//! Fusion transformer over flat sentence/entity/relation sequences.

pub mod attention;
pub mod checkpoint;
pub mod config;
pub mod encoder;
pub mod mask;
pub mod model;
pub mod params;
pub mod position;
pub mod train;

pub use attention::{attention_scores, HeadParams};
pub use config::{ModelConfig, Pooling};
pub use encoder::{toy_sentence_encoder, SentenceEncoder};
pub use mask::{masked_softmax, visible_matrix, MASKED};
pub use model::{DropoutKey, ForwardOutput, FusionModel, Mode, Prepared};
pub use params::{Param, ParamSet};
pub use position::{relative_distances, sinusoid, PositionEncoder};
pub use train::{train, AdamW, EpochMetrics, TrainConfig, TrainOutcome};

