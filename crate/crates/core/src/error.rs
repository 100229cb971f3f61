use thiserror::Error;

/// Errors raised by the numerical kernels and model builders.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },

    #[error("QR iteration did not converge: {iterations} iterations on the trailing {active}x{active} block")]
    NoConvergence { iterations: usize, active: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature did not stabilise for |x|^{exponent} up to {max_order} nodes (last change {change:e})")]
    QuadratureNotConverged {
        exponent: f64,
        max_order: usize,
        change: f64,
    },

    #[error("level {level} is degenerate: gap {gap:e} to the nearest unperturbed level")]
    DegenerateLevel { level: usize, gap: f64 },

    #[error("too few nonzero coefficients ({found}) for a radius estimate, need {needed}")]
    TooFewCoefficients { found: usize, needed: usize },

    #[error("label mismatch at eps = 0: computed {computed} is {distance:e} away from the unperturbed level {expected}")]
    LabelMismatch {
        computed: f64,
        expected: f64,
        distance: f64,
    },

    #[error("ambiguous continuation at eps = {eps} ({truncation}): eigenvalue jump {jump:e} exceeds match_tol {match_tol:e}")]
    MatchingAmbiguity {
        eps: f64,
        truncation: String,
        jump: f64,
        match_tol: f64,
    },

    #[error("invalid bracket [{lo}, {hi}]: pair is {status} at both ends")]
    InvalidBracket {
        lo: f64,
        hi: f64,
        status: &'static str,
    },

    #[error("truncation not converged at eps = {eps}: {truncation} -> {refined} moves {label} by {shift:e} (tolerance {tol:e})")]
    TruncationNotConverged {
        eps: f64,
        label: String,
        truncation: String,
        refined: String,
        shift: f64,
        tol: f64,
    },

    #[error("eigenvalue solve failed at eps = {eps} ({truncation}): {source}")]
    AtPoint {
        eps: f64,
        truncation: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Attach the coupling and truncation at which a numerical failure happened.
    pub fn at_point(self, eps: f64, truncation: impl ToString) -> Self {
        match self {
            e @ (Error::AtPoint { .. }
            | Error::MatchingAmbiguity { .. }
            | Error::TruncationNotConverged { .. }) => e,
            other => Error::AtPoint {
                eps,
                truncation: truncation.to_string(),
                source: Box::new(other),
            },
        }
    }

    /// True for failures caused by invalid input rather than numerics.
    pub fn is_invalid_input(&self) -> bool {
        match self {
            Error::NonSquare { .. }
            | Error::DimensionMismatch { .. }
            | Error::NonFinite { .. }
            | Error::InvalidParameter(_)
            | Error::InvalidBracket { .. } => true,
            Error::AtPoint { source, .. } => source.is_invalid_input(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
