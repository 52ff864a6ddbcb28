use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid too coarse: {axis} axis has {nodes} nodes, need at least {min}")]
    GridTooCoarse { axis: &'static str, nodes: usize, min: usize },

    #[error("field has zero (or non-finite) norm")]
    DegenerateField,

    #[error("field must be normalized before this operation")]
    NotNormalized,

    #[error("conditional slice at {axis} = {value} carries {relative:e} of the total norm")]
    SliceUnderflow { axis: &'static str, value: f64, relative: f64 },

    #[error("singular value factorization of a {rows}x{cols} matrix did not converge")]
    SvdNoConvergence { rows: usize, cols: usize },

    #[error("Jacobi diagonalization did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    JacobiNoConvergence { sweeps: usize, off_norm: f64 },

    #[error("oracle path limited to {limit} nodes per axis, got {nodes}")]
    GridTooLarge { nodes: usize, limit: usize },

    #[error("Schmidt coefficient {index} is {lambda:e}, below the floor {floor:e}")]
    LambdaUnderflow { index: usize, lambda: f64, floor: f64 },

    #[error("degenerate abscissa: fit basis is singular")]
    DegenerateAbscissa,

    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
}

impl Error {
    /// True for failures of the numerics themselves, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateField
                | Error::SliceUnderflow { .. }
                | Error::SvdNoConvergence { .. }
                | Error::JacobiNoConvergence { .. }
                | Error::LambdaUnderflow { .. }
        )
    }
}
