use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {point:?} lies outside the domain of `{map}`")]
    DomainViolation { map: String, point: Vec<f64> },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite coordinate in {0}")]
    NonFinite(&'static str),

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("unknown catalog entry `{0}`")]
    UnknownKind(String),

    #[error("bad dimension: {0}")]
    BadDimension(String),

    #[error("corank index k = {k} outside 1..={v}")]
    BadK { k: usize, v: usize },

    #[error("(n, l) = ({n}, {l}) is not an admissible pair: {reason}")]
    BadDimensionPair {
        n: usize,
        l: usize,
        reason: &'static str,
    },

    #[error("chart is not an immersion at {t:?}")]
    NotImmersionAt { t: Vec<f64> },

    #[error("degenerate tuple: points {0} and {1} coincide")]
    DegenerateTuple(usize, usize),

    #[error("too few points: need at least {need}, got {got}")]
    TooFewPoints { need: usize, got: usize },

    #[error("search budget exhausted: {0}")]
    BudgetExhausted(String),

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("cannot aggregate reports of different scenarios ({0} vs {1})")]
    MixedScenario(String, String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
