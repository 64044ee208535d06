use thiserror::Error;

pub type Result<T> = std::result::Result<T, RpcaError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RpcaError {
    #[error("{op}: dimension mismatch ({left_rows}x{left_cols} vs {right_rows}x{right_cols})")]
    DimensionMismatch {
        op: &'static str,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    #[error("matrices must have at least one row and one column (got {rows}x{cols})")]
    EmptyMatrix { rows: usize, cols: usize },

    #[error("non-finite entry {value} at row {row}, column {col}")]
    NonFinite { row: usize, col: usize, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("SVD of a {rows}x{cols} matrix failed to converge")]
    SvdFailure { rows: usize, cols: usize },

    #[error("outer iteration {iter}: {source}")]
    AtIteration {
        iter: usize,
        #[source]
        source: Box<RpcaError>,
    },
}

impl RpcaError {
    pub(crate) fn mismatch(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Self {
        RpcaError::DimensionMismatch {
            op,
            left_rows: left.0,
            left_cols: left.1,
            right_rows: right.0,
            right_cols: right.1,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        RpcaError::InvalidArgument(msg.into())
    }
}
