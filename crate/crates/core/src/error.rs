use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: unknown {kind} {symbol:?} in language {language}")]
    UnknownSymbol {
        path: PathBuf,
        line: usize,
        kind: &'static str,
        symbol: String,
        language: String,
    },

    #[error("{0}: file contains no triples")]
    EmptyGraph(PathBuf),

    #[error("invalid knowledge base: {0}")]
    InvalidKb(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot project the zero vector onto the unit sphere")]
    ZeroVector,

    #[error("no transition stored between {0} and {1}")]
    UnknownPair(String, String),

    #[error("unknown language {0}")]
    UnknownLanguage(String),

    #[error("transition matrix is singular (condition estimate {condition:e})")]
    SingularMatrix { condition: f64 },

    #[error("model format: {0}")]
    Format(String),

    #[error("evaluation: {0}")]
    Eval(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
