use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("matrix game solver did not converge after {iterations} pivots")]
    SolverDiverged { iterations: usize },

    #[error("matrix game solution failed verification: exploitability {exploitability:e} exceeds {tol:e}")]
    SolverInaccurate { exploitability: f64, tol: f64 },

    #[error("while solving stage h={h}, state x={x}: {source}")]
    AtState {
        h: usize,
        x: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("size cap exceeded: {size} measures, cap is {cap}")]
    SizeCap { size: usize, cap: usize },

    #[error("version space is empty: {0}")]
    EmptyVersionSpace(String),

    #[error("audit failure: {0}")]
    Audit(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
}

impl Error {
    pub(crate) fn at_state(self, h: usize, x: usize) -> Self {
        Error::AtState { h, x, source: Box::new(self) }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }
}
