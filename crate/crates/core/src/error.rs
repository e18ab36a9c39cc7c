use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Two fields (or a field and a spec) disagree on their lattice.
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// A numerical derivative or iterative solve did not settle.
    #[error("tolerance not met: {what} (change {change:.3e}, allowed {allowed:.3e})")]
    Tolerance {
        what: String,
        change: f64,
        allowed: f64,
    },

    #[error("degenerate constraint matrix: smallest singular value {smallest:.3e}")]
    Degeneracy { smallest: f64 },

    #[error("wave function node reached at t = {time}: |psi|^2 = {density:.3e} below {threshold:.3e}")]
    Node {
        time: f64,
        density: f64,
        threshold: f64,
    },

    #[error("degenerate state: {0}")]
    DegenerateState(String),

    #[error("linear solver failed: {0}")]
    Solver(String),

    #[error("wave function not normalized: norm^2 = {0}")]
    Normalization(f64),

    #[error("lightlike current: a^2 + b^2 = {value:.3e} at or below {threshold:.3e}")]
    Lightlike { value: f64, threshold: f64 },

    #[error("Gaussian width collapsed in mode {mode}: Re(alpha) = {re_alpha}")]
    Instability { mode: usize, re_alpha: f64 },

    #[error("reality pairing broken: {0}")]
    Reality(String),

    #[error("invalid test: {0}")]
    InvalidTest(String),

    #[error("validation error in `{key}`: {message}")]
    Validation { key: String, message: String },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Validation and parse failures are user errors; everything else is numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation { .. } | Error::Parse { .. } | Error::Config(_) => 2,
            Error::Io(_) | Error::Json(_) => 1,
            _ => 3,
        }
    }
}
