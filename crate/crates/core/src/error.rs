use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what}: value {value} outside [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invalid flux: {0}")]
    InvalidFlux(String),

    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("no sign change in bracket [{lo}, {hi}] (residuals {r_lo:.3e}, {r_hi:.3e}); widen or move the window")]
    Bracketing { lo: f64, hi: f64, r_lo: f64, r_hi: f64 },

    #[error("conjugate gradients did not converge in {iterations} iterations (last relative residual {last:.3e})")]
    SolverDiverged {
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },

    #[error("non-finite energy at cell ({i}, {k})")]
    NonFinite { i: usize, k: usize },

    #[error("(Du, v_t) = ({p}, {beta}) at cell ({i}, {k}) leaves the envelope window")]
    WindowExcursion {
        i: usize,
        k: usize,
        p: f64,
        beta: f64,
    },

    #[error("table line {line}: {msg}")]
    Table { line: u64, msg: String },

    #[error("malformed cache: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
