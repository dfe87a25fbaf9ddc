use thiserror::Error;

/// Failure modes shared by every module.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("quadrature did not converge: error estimate {estimate:.3e} exceeds tolerance {tolerance:.3e}")]
    NonConvergence { estimate: f64, tolerance: f64 },

    #[error("Fock cutoff too small: {detail}")]
    CutoffTooSmall { detail: String },

    #[error("secular equation residual {residual:.3e} exceeds 1e-6")]
    SecularMismatch { residual: f64 },

    #[error("band gap closes between bands {lower} and {upper} (minimum gap {gap:.3e})")]
    GapClosure { lower: usize, upper: usize, gap: f64 },

    #[error("grid half-width too small: boundary magnitude {boundary:.3e}")]
    DomainTooSmall { boundary: f64 },

    #[error("invalid squeeze parameters: v^2 - u^2 - 1 = {deviation:.3e}")]
    InvalidSqueeze { deviation: f64 },

    #[error("integration step rejected at t = {t}: step size {h:.3e} underflowed")]
    StepRejected { t: f64, h: f64 },

    #[error("atoms {i} and {j} collided at t = {t} (R = {r:.3e})")]
    CollisionSingularity { t: f64, i: usize, j: usize, r: f64 },

    #[error("invalid parameter: {0}")]
    Validation(String),

    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
}

impl Error {
    /// Short variant name, as reported by the CLI.
    pub fn name(&self) -> &'static str {
        match self {
            Error::NonConvergence { .. } => "NonConvergence",
            Error::CutoffTooSmall { .. } => "CutoffTooSmall",
            Error::SecularMismatch { .. } => "SecularMismatch",
            Error::GapClosure { .. } => "GapClosure",
            Error::DomainTooSmall { .. } => "DomainTooSmall",
            Error::InvalidSqueeze { .. } => "InvalidSqueeze",
            Error::StepRejected { .. } => "StepRejected",
            Error::CollisionSingularity { .. } => "CollisionSingularity",
            Error::Validation(_) => "ValidationError",
            Error::Parse { .. } => "ParseError",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Validation(msg()))
    }
}
