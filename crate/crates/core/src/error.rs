use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of a function.
    #[error("domain error in {what}: {value}")]
    Domain { what: &'static str, value: f64 },

    /// A target value cannot be reached by an inverse.
    #[error("range error in {what}: {value} is not attainable")]
    Range { what: &'static str, value: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A sequential empirical law ran out of rows.
    #[error("empirical law exhausted after {rows} rows")]
    Exhausted { rows: usize },

    #[error("quadrature failed{}: {message}", eps.map(|e| format!(" at eps = {e}")).unwrap_or_default())]
    Quadrature { eps: Option<f64>, message: String },

    /// Fewer usable tail cells than a regression needs.
    #[error("insufficient tail data: {usable} usable cells, need at least {needed}")]
    InsufficientTailData { usable: usize, needed: usize },

    /// A simulated value left the representable range.
    #[error("overflow in replica {replica} at step {step}: value {value}")]
    Overflow { replica: usize, step: u64, value: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
