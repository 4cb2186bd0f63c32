use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside the admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Shapes of the inputs do not agree.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A value failed a structural check (projector, frame, weights).
    #[error("validation failed: {0}")]
    Validation(String),

    /// The Hankel system of the Prony solve is numerically singular.
    #[error("ill-conditioned Hankel system (condition number {condition:.3e}, minimal separation {min_separation:.3e})")]
    IllConditioned { condition: f64, min_separation: f64 },

    /// The Prony polynomial has complex roots.
    #[error("spurious complex root with imaginary part {imag:.3e}")]
    SpuriousRoot { imag: f64 },

    /// A moment lifting system lacks full column rank.
    #[error("frame does not span homogeneous polynomials of degree {degree} (rank {rank} < {required})")]
    Underdetermined {
        degree: usize,
        rank: usize,
        required: usize,
    },

    /// An input file does not follow the expected format.
    #[error("malformed input: {0}")]
    Format(String),

    /// A combinatorial quantity that must be integral is not.
    #[error("internal consistency check failed: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_dims(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
