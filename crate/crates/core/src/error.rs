use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(
        "gate sequence differs from target beyond a global phase (max deviation {deviation:.3e})"
    )]
    Mismatch { deviation: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid noise specification `{spec}`: {reason}; expected noiseless | imprecision:sigma2=<f> | proportional:sigma2=<f> | depolarizing:p=<f>[,bias=x|y|z|iso]")]
    NoiseSpec { spec: String, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("density matrix invariant violated: {0}")]
    InvalidState(String),

    #[error(
        "power iteration did not converge in {iterations} iterations (last change {change:.3e})"
    )]
    NoConvergence { iterations: usize, change: f64 },

    #[error("eigenpair residual {residual:.3e} exceeds {bound:.1e}")]
    Residual { residual: f64, bound: f64 },

    #[error("expectation value has imaginary part {0:.3e}")]
    NotReal(f64),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("fit failed: {0}")]
    Fit(String),
}
