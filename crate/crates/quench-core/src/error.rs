use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuenchError {
    #[error("invalid chain length {0}: need 2 <= N <= {max}", max = crate::model::MAX_SITES)]
    InvalidChain(usize),
    #[error("N = {n} is not compatible with {family}: {requirement}")]
    Divisibility {
        n: usize,
        family: String,
        requirement: String,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid bond pattern: {0}")]
    InvalidPattern(String),
    #[error("degenerate Fermi level: gap {gap:.3e} between modes N/2 and N/2+1")]
    DegenerateFermiLevel { gap: f64 },
    #[error("eigensolver did not converge within {0} iterations")]
    NonConvergence(usize),
    #[error("argument out of range: {0}")]
    OutOfRange(String),
    #[error("numerical validity violated: {0}")]
    NumericalValidity(String),
    #[error("no family closed form for {0}")]
    NoClosedForm(String),
    #[error("no plateau reached: {0}")]
    NoPlateau(String),
    #[error("not enough samples: need {need}, got {got}")]
    InsufficientSamples { need: usize, got: usize },
    #[error("fit rejected: {0}")]
    FitRejected(String),
    #[error("missing saturation data for trace {0}")]
    MissingSaturation(usize),
}

impl QuenchError {
    /// True for failures that signal a broken numerical invariant rather than
    /// a bad input or an inconclusive analysis.
    pub fn is_invariant_violation(&self) -> bool {
        matches!(
            self,
            QuenchError::NumericalValidity(_) | QuenchError::NonConvergence(_)
        )
    }

    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            QuenchError::InvalidChain(_)
                | QuenchError::Divisibility { .. }
                | QuenchError::InvalidParameter(_)
                | QuenchError::InvalidPattern(_)
                | QuenchError::OutOfRange(_)
                | QuenchError::NoClosedForm(_)
                | QuenchError::DegenerateFermiLevel { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, QuenchError>;
