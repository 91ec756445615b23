use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("codebook {location}: {kind}")]
    Codebook {
        location: String,
        kind: CodebookViolation,
    },

    #[error("ldpc: {0}")]
    Ldpc(String),

    #[error("infeasible scheme ({k_eq},{packets},{initial_reps}): {reason}")]
    InfeasibleScheme {
        k_eq: usize,
        packets: usize,
        initial_reps: usize,
        reason: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodebookViolation {
    /// Nonzero codeword entry where the signature is zero, or vice versa.
    Sparsity,
    /// Average codeword energy differs from 1.
    Energy,
    /// `M` is not a power of two in `2..=16`.
    Order,
    /// Signature columns or rows have unequal weights.
    Irregular,
    /// `J <= R`.
    NotOverloaded,
    Shape,
}

impl std::fmt::Display for CodebookViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            CodebookViolation::Sparsity => "sparsity mismatch with signature",
            CodebookViolation::Energy => "average codeword energy is not 1",
            CodebookViolation::Order => "M is not 2^b",
            CodebookViolation::Irregular => "signature is not regular",
            CodebookViolation::NotOverloaded => "J must exceed R",
            CodebookViolation::Shape => "array shape does not match J/R/M",
        };
        f.write_str(s)
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures reading or writing files, as opposed to bad content.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
