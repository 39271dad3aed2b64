use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A requested gate time or geometry cannot be realised.
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("time {t} ps outside [0, {total}] ps")]
    TimeOutOfRange { t: f64, total: f64 },

    #[error("loop is not closed at the north pole: {0}")]
    NotClosed(String),

    #[error("no crossing found: {0}")]
    NoCrossing(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
}
