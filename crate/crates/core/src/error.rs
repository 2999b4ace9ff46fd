use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite input to {0}")]
    NonFinite(&'static str),

    #[error("{what} has a pole at (y, r) = ({y}, {r})")]
    Pole { what: &'static str, y: f64, r: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("negative height {value:e} at grid index {index}")]
    NegativeHeight { index: usize, value: f64 },

    #[error("non-finite right-hand side at grid index {index} (x = {x})")]
    NonFiniteRhs { index: usize, x: f64 },

    #[error("{0}")]
    Domain(String),

    #[error("step size fell below dt_min at t = {}", .0.t)]
    BlowupSuspected(Box<crate::evolution::SimState>),

    #[error("{what} did not converge: {detail}")]
    NotConverged { what: &'static str, detail: String },

    #[error("configuration has {} problem(s):\n  - {}", .0.len(), .0.join("\n  - "))]
    Config(Vec<String>),

    #[error("malformed diagnostics CSV at row {row}: {message}")]
    Csv { row: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_finite(what: &'static str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
