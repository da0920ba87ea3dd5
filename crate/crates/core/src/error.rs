use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("utility history holds {have} snapshots, delay of {need} steps needs {}", need + 1)]
    ShortHistory { have: usize, need: usize },

    #[error("no root of the equilibrium quadratic lies in (0, {n})")]
    NoInteriorRoot { n: f64 },

    #[error("lambert_w is undefined for z = {0} < -1/e")]
    LambertDomain(f64),

    #[error("{what} did not converge within {budget} iterations")]
    NoConvergence { what: &'static str, budget: usize },

    #[error("group is empty")]
    EmptyGroup,

    #[error("scenario shape: {0}")]
    Shape(String),

    #[error("only {paired} of {total} OMDs could be paired within range")]
    PairingInfeasible { paired: usize, total: usize },

    #[error("config parse error at line {line}, column {column}: {message}")]
    ConfigParse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("config validation failed: {0}")]
    ConfigValidation(String),

    #[error("schema check failed for {file}: {message}")]
    Schema { file: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
