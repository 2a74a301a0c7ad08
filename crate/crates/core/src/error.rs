use thiserror::Error;

/// Errors raised while reading data or fitting a model.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("information matrix is rank deficient at column {column}")]
    Rank { column: usize },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("cannot parse {value:?} as a number at row {row}, column {column:?}")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("read error: {0}")]
    Read(String),

    #[error("data source cannot be rewound")]
    NotRewindable,

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("need more observations ({n}) than parameters ({p})")]
    DegreesOfFreedom { n: usize, p: usize },

    #[error("coefficient {index} diverged (|beta| = {value:e})")]
    Divergence { index: usize, value: f64 },

    #[error("regressor is constant; slope is undefined")]
    DegenerateRegressor,

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Read(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
