//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid physical or numerical parameter (bad Poisson ratio, negative
    /// permittivity, non-positive element size, ...).
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Geometric inconsistency: non-unit normal, inverted element, periodic
    /// faces that do not match under the declared translation.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// Requested element shape/degree combination is not supported.
    #[error("unsupported capability: {0}")]
    Capability(String),

    /// A point lies outside the reference element.
    #[error("point outside reference domain: {0}")]
    Domain(String),

    /// Mesh connectivity problem: non-manifold face, invalid rotation code,
    /// mismatched quadrature counts across a face.
    #[error("connectivity error: {0}")]
    Connectivity(String),

    /// Problem specification error: unclassified boundary face, point load
    /// off the vertex set, conflicting constraints.
    #[error("specification error: {0}")]
    Specification(String),

    /// Text input could not be parsed.
    #[error("parse error{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, msg: String },

    /// Numerical failure: singular factorization, eigen-iteration stagnation,
    /// degenerate bilinear forms.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// I/O failure with path context.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn parse_at(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line: Some(line),
            msg: msg.into(),
        }
    }

    pub fn parse(msg: impl Into<String>) -> Self {
        Error::Parse {
            line: None,
            msg: msg.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
