use thiserror::Error;

use crate::geometry::Group;

/// Errors raised by the geometry, solver and harness layers.
#[derive(Debug, Error)]
pub enum Error {
    /// The rotation angle of a relative rotation came within the cut-locus
    /// margin of pi, where the logarithm stops being single valued.
    #[error("logarithm undefined: rotation angle {angle} exceeds pi - {margin}")]
    CutLocus { angle: f64, margin: f64 },

    #[error("degenerate matrix: {0}")]
    DegenerateMatrix(String),

    #[error("group mismatch: expected {expected}, found {found}")]
    GroupMismatch { expected: Group, found: Group },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid group element: {0}")]
    InvalidPoint(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("graph generation failed: {0}")]
    Generation(String),

    #[error("graph is not connected")]
    Disconnected,

    #[error("karcher iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A solver failed at a given iteration. The source is usually a cut-locus
    /// or divergence error.
    #[error("solver failed at iteration {iteration}: {source}")]
    Solver {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        match self {
            e @ Error::Solver { .. } => e,
            other => Error::Solver {
                iteration,
                source: Box::new(other),
            },
        }
    }

    /// Process exit code for the `rcm-sim` binary.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) | Error::Io(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
