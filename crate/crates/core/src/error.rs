use thiserror::Error;

/// Errors produced by the walk, estimator and reference layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("point {0:?} is not in the Weyl chamber")]
    OutsideChamber(Vec<f64>),

    #[error("degenerate run: {0}")]
    Degenerate(String),

    #[error("quadrature did not converge: value {value:e}, error bound {error:e}")]
    Budget { value: f64, error: f64 },

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("acceptance rate {rate:e} too low; use the particle sampler instead")]
    AcceptanceTooLow { rate: f64 },

    #[error("envelope violated (ratio {0}); rejection sampler needs recalibration")]
    Envelope(f64),

    #[error("data error: {0}")]
    Data(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
