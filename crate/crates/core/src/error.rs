use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite value in input")]
    NonFiniteInput,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("entropy prox needs a strictly positive dual iterate")]
    DegenerateDual,
    #[error("set is unbounded")]
    UnboundedSet,
    #[error("invalid constant `{name}` = {value}")]
    InvalidConstant { name: &'static str, value: f64 },
    #[error("dual weight on the objective row collapsed (gamma = {0:e})")]
    GammaDegenerate(f64),
    #[error("start point is infeasible (max violation {0:e})")]
    InfeasibleStart(f64),
    #[error("grid has {0} points, above the cap")]
    GridTooLarge(u128),
    #[error("alpha must lie in (0, 1), got {0}")]
    BadAlpha(f64),
    #[error("theta must be positive, got {0}")]
    BadTheta(f64),
    #[error("psi must be at least 1, got {0}")]
    BadPsi(f64),
    #[error("phi must be positive, got {0}")]
    BadPhi(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
}

impl Error {
    pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
        if expected == got {
            Ok(())
        } else {
            Err(Error::DimMismatch { expected, got })
        }
    }

    pub(crate) fn positive(name: &'static str, value: f64) -> Result<f64> {
        if value > 0.0 && value.is_finite() {
            Ok(value)
        } else {
            Err(Error::InvalidConstant { name, value })
        }
    }
}
