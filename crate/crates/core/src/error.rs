use std::fmt;

use thiserror::Error;

use crate::trace::Stage;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Raised when private content reaches host-level control flow or a public
/// output without passing through decryption.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("taint violation in `{operation}` at {site}")]
pub struct TaintViolation {
    pub operation: String,
    pub site: String,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left} vs {right}")]
    ShapeMismatch {
        op: &'static str,
        left: String,
        right: String,
    },
    #[error("handle from context {found} used in context {expected}")]
    ContextMismatch { expected: u64, found: u64 },
    #[error("{backend} backend does not support {capability}")]
    Unsupported {
        backend: String,
        capability: &'static str,
    },
    #[error("decryption refused: {0}")]
    Authority(String),
    #[error("numeric domain error: {0}")]
    Domain(String),
    #[error("masked reciprocal of zero")]
    DivisionByZero,
    #[error("no randomness source for the helper protocol")]
    NoRandomness,
    #[error(transparent)]
    Taint(#[from] TaintViolation),
    #[error("mpc: {0}")]
    Mpc(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("stage {stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn shape(op: &'static str, left: impl fmt::Debug, right: impl fmt::Debug) -> Self {
        Error::ShapeMismatch {
            op,
            left: format!("{left:?}"),
            right: format!("{right:?}"),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// Tags the error with the pipeline stage it escaped from.
    pub fn at_stage(self, stage: Stage) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }
}
