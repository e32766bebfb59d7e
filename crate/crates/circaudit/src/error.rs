use thiserror::Error;

#[derive(Error, Debug)]
pub enum CircError {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("column of constant values cannot support a spline or a correlation: {0}")]
    ConstantColumn(String),

    #[error("unknown feature '{0}'")]
    UnknownFeature(String),

    #[error("unknown column '{0}'")]
    UnknownColumn(String),

    #[error("target '{0}' has no variance")]
    ZeroTargetVariance(String),

    #[error("non-finite value in column '{column}' at row {row}")]
    NonFinite { column: String, row: usize },

    #[error("cannot parse cell at row {row}, column '{column}': '{value}'")]
    ParseCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("duplicate header name '{0}'")]
    DuplicateHeader(String),

    #[error("ragged CSV: row {row} has {found} cells, expected {expected}")]
    RaggedRow {
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("{0} features exceed the exhaustive-search cap of {1}; preselect by correlation first (--preselect)")]
    TooManyCandidates(usize, usize),

    #[error("binomial family requires a {{0,1}} target, found value {0}")]
    NonBinaryTarget(f64),

    #[error("need at least {need} rows, found {found}")]
    TooFewRows { need: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("linear system is not positive definite (column-collinear design?)")]
    NotPositiveDefinite,

    #[error("split fraction {0} leaves an empty partition")]
    EmptySplit(f64),

    #[error("io error on '{path}': {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, CircError>;
