//! Error taxonomy shared by every module. The CLI maps `Input`/`Bound`/
//! `Coverage`/`Schema` to exit code 2; law failures are reported through
//! [`crate::report::Report`] and map to exit code 1.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("input error: {0}")]
    Input(String),

    #[error("bound error: {0}")]
    Bound(String),

    /// Required data (an eval entry, a composite, a slot) is missing within
    /// the working bound.
    #[error("coverage error: {0}")]
    Coverage(String),

    /// An assignment or arrow family is not composable.
    #[error("composability error: {0}")]
    Composability(String),

    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
}

impl EngineError {
    pub fn input(msg: impl Into<String>) -> EngineError {
        EngineError::Input(msg.into())
    }
    pub fn bound(msg: impl Into<String>) -> EngineError {
        EngineError::Bound(msg.into())
    }
    pub fn coverage(msg: impl Into<String>) -> EngineError {
        EngineError::Coverage(msg.into())
    }
    pub fn composability(msg: impl Into<String>) -> EngineError {
        EngineError::Composability(msg.into())
    }
}
