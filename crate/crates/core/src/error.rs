use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value fell outside the domain an operation accepts.
    #[error("input out of domain: {0}")]
    InputDomain(String),

    /// Operand shapes do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// A file did not carry the expected magic, version or header.
    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    /// Parsed data contradicts itself (counts, sizes, label coverage).
    #[error("inconsistent data: {0}")]
    Consistency(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },

    /// A non-finite loss or gradient showed up during training.
    #[error("numerical instability in layer {layer}{}: {detail}", location(.batch, .step))]
    Numerical {
        layer: usize,
        batch: Option<usize>,
        step: Option<usize>,
        detail: String,
    },
}

fn location(batch: &Option<usize>, step: &Option<usize>) -> String {
    match (batch, step) {
        (Some(b), Some(t)) => format!(" at batch {b}, step {t}"),
        (Some(b), None) => format!(" at batch {b}"),
        (None, Some(t)) => format!(" at step {t}"),
        (None, None) => String::new(),
    }
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn shape(detail: impl Into<String>) -> Self {
        Error::Shape(detail.into())
    }
}
