use thiserror::Error;

/// Errors raised by the CTP lab.
///
/// Input errors describe malformed requests. Numerical errors describe a
/// well-formed request whose computation could not be completed.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CtpError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("trajectory length {found} does not match grid with {expected} nodes")]
    LengthMismatch { expected: usize, found: usize },

    #[error("legs do not agree at the final node: x+ = {plus}, x- = {minus}")]
    NotClosed { plus: f64, minus: f64 },

    #[error("trajectory diverged at node {index}")]
    Divergence { index: usize },

    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },

    #[error("kernel is singular at frequency {frequency}")]
    Singularity { frequency: f64 },

    #[error("endpoint elimination is degenerate: |B D0 B| = {magnitude:e}")]
    DegenerateEndpoint { magnitude: f64 },

    #[error("block structure violated: residual {residual:e} exceeds tolerance {tolerance:e}")]
    StructureViolation { residual: f64, tolerance: f64 },

    #[error("tree-graph iteration stopped contracting at iterate {iterate} (residual {residual:e})")]
    NonContraction { iterate: usize, residual: f64 },

    #[error("memory kernel with backward arrow has support in the future of the evaluation time")]
    AcausalMemory,

    #[error("linear solve failed: {0}")]
    SingularMatrix(String),

    #[error("trajectory is not on shell: equation-of-motion residual {residual:e} exceeds {tolerance:e}")]
    OffShell { residual: f64, tolerance: f64 },
}

impl CtpError {
    /// True for errors caused by the request itself rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            CtpError::InvalidInput(_)
                | CtpError::LengthMismatch { .. }
                | CtpError::NotClosed { .. }
                | CtpError::OffShell { .. }
                | CtpError::AcausalMemory
        )
    }
}

pub type Result<T> = std::result::Result<T, CtpError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(CtpError::InvalidInput(msg.into()))
}

pub(crate) fn require_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        invalid(format!("{name} must be positive and finite, got {value}"))
    }
}

pub(crate) fn require_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        invalid(format!("{name} must be finite, got {value}"))
    }
}
