use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value fell outside the domain of the model or routine.
    #[error("domain error: {0}")]
    Domain(String),

    /// The input is valid but not handled by this routine (e.g. too large to enumerate).
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    /// An internal consistency check failed, e.g. a concavity violation in ARS.
    #[error("integrity check failed: {0}")]
    Integrity(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("iteration limit reached: {0}")]
    NonConvergence(String),

    /// More replicates failed than an experiment tolerates.
    #[error("replicate failures: {0}")]
    Replicates(String),

    #[error("block {block}: {source}")]
    Block {
        block: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn in_block(self, block: usize) -> Error {
        match self {
            e @ Error::Block { .. } => e,
            e => Error::Block { block, source: Box::new(e) },
        }
    }

    /// Strips any block wrapper to expose the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::Block { source, .. } => source.root(),
            e => e,
        }
    }
}

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("{what}: non-finite entry at index {i} ({})", values[i])));
    }
    Ok(())
}
