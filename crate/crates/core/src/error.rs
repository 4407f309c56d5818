use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EdgeError {
    #[error("invalid hopping profile: {0}")]
    InvalidProfile(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// epsilon = 0 at k = 0: the propagation matrix is the identity.
    #[error("gapless configuration: no decaying direction at k = 0 with zero dimerization")]
    DegenerateGapless,

    #[error("constructed state is not a zero mode (residual {residual:.3e})")]
    NotAZeroMode { residual: f64 },

    #[error("no kept eigenvalue inside the bulk gap")]
    NoMidGapState,

    #[error("time step too large: dt * rho = {product:.3} exceeds {limit}")]
    StepTooLarge { product: f64, limit: f64 },

    #[error("domain extent {0} x {1} is below the 20 x 20 minimum")]
    DegenerateExtent(usize, usize),

    #[error("dispersion is not conical: fit spread {spread:.3e}")]
    NotConical { spread: f64 },
}

pub type Result<T> = std::result::Result<T, EdgeError>;
