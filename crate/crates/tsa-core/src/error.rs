//! Error type shared across the library.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Error)]
pub enum CoreError {
    /// Dimension mismatch; `context` names the operation, `detail` the offending operand.
    #[error("shape mismatch in {context}: {detail}")]
    Shape { context: &'static str, detail: String },

    #[error("degenerate network: the eliminated-bus submatrix is singular")]
    DegenerateNetwork,

    #[error("power flow did not converge after {iterations} iterations (max mismatch {mismatch:.3e})")]
    PowerFlowDiverged { iterations: usize, mismatch: f64 },

    #[error("stability index undefined: need at least two machines, got {0}")]
    UndefinedIndex(usize),

    #[error("stability index undefined: empty post-fault window")]
    EmptyWindow,

    #[error("cannot balance dataset: class `{class}` has only {have} candidate events, need {need}")]
    Imbalance {
        class: &'static str,
        have: usize,
        need: usize,
    },

    #[error("gradient tape does not match current parameters (stale tape)")]
    TapeMismatch,

    #[error("training diverged at level {level}, episode {episode}: {what}")]
    Diverged {
        level: usize,
        episode: usize,
        what: String,
    },

    #[error("model not ready: {0}")]
    NotReady(String),

    #[error("rollout depth {depth} exceeds level count {levels}")]
    DepthRange { depth: usize, levels: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error in {file} at line {line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },

    #[error("unsupported file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CoreError {
    pub fn shape(context: &'static str, detail: impl Into<String>) -> Self {
        CoreError::Shape {
            context,
            detail: detail.into(),
        }
    }
}
