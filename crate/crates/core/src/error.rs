//! Crate-wide error type.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A binary or text file did not match its declared format.
    #[error("format error in {path}: {message}")]
    Format { path: String, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Model configuration does not match the data it was applied to.
    #[error("model configuration error: {0}")]
    Config(String),

    /// Decoder state handed to a model it does not belong to.
    #[error("decoder state error: {0}")]
    State(String),

    /// A symbol that cannot be represented in the active vocabulary.
    #[error("unknown token {symbol:?}")]
    UnknownToken { symbol: String },

    /// A latency metric was requested on data it is undefined for.
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// Transport-level failure talking to a remote model (timeouts, closed
    /// connections, unparseable responses). Distinct from model errors.
    #[error("transport error: {0}")]
    Transport(String),

    /// The remote side rejected the handshake.
    #[error("handshake rejected: {0}")]
    Handshake(String),

    /// The remote side answered with a protocol-level error record.
    #[error("bridge protocol error [{code}]: {message}")]
    Protocol { code: String, message: String },

    /// The model failed while the decoding loop was in flight. The tokens
    /// and trace steps committed before the failure are preserved.
    #[error("decoding aborted after {} step(s): {source}", partial.steps.len())]
    DecodeAborted {
        #[source]
        source: Box<Error>,
        partial: Box<crate::engine::PartialDecode>,
    },

    /// Manifest-level failures (duplicate ids, missing utterances).
    #[error("manifest error: {0}")]
    Manifest(String),

    /// An utterance failed inside a sweep; names the failing id.
    #[error("utterance {id:?} failed: {source}")]
    Utterance {
        id: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
