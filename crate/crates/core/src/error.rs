use thiserror::Error;

use crate::domain::RelationKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("score {value} is out of range for scheme {scheme}")]
    ScoreOutOfRange { scheme: &'static str, value: i64 },

    #[error("unknown {kind} relation sense {name:?}; valid senses: {}", valid.join(", "))]
    UnknownSense {
        name: String,
        kind: RelationKind,
        valid: Vec<String>,
    },

    #[error("structural error: {0}")]
    Structural(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite activation in layer {layer} ({site})")]
    NonFinite { layer: usize, site: &'static str },

    #[error("training diverged at epoch {epoch}, step {step} (loss = {loss})")]
    Divergence { epoch: usize, step: usize, loss: f64 },

    #[error("line {line}: {source}")]
    CorpusLine {
        line: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed record: {0}")]
    Json(#[from] serde_json::Error),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("unknown domain tag {0}")]
    UnknownTag(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }
}
