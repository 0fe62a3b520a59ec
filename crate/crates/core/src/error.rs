use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    InvalidArgument { field: &'static str, reason: String },

    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("eigenvalue {index} failed to deflate within {max_sweeps} sweeps")]
    NoConvergence { index: usize, max_sweeps: usize },

    #[error("singular pivot in column {column} of the resolvent elimination")]
    SingularPivot { column: usize },

    #[error("{identity} identity violated: discrepancy {discrepancy:e} exceeds budget {budget:e}")]
    InvariantViolation {
        identity: &'static str,
        discrepancy: f64,
        budget: f64,
    },

    #[error("realization {stream_id}: {source}")]
    Realization {
        stream_id: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            field,
            reason: reason.into(),
        }
    }
}
