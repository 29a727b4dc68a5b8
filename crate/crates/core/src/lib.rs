//! Approximate matrix multiplication with sketch sizes driven by stable rank.
//!
//! The central object is a sketching operator Π (Gaussian, random-sign,
//! subsampled randomized Hadamard, sparse embedding, or a composition) that
//! compresses the shared row dimension of a product AᵀB. The guarantee
//! tracked throughout is the (k, ε) multiplication bound
//!
//! ```text
//! ‖(ΠA)ᵀ(ΠB) − AᵀB‖ ≤ ε · √( (‖A‖² + ‖A‖_F²/k) · (‖B‖² + ‖B‖_F²/k) )
//! ```
//!
//! which degrades gracefully with the stable rank ‖·‖_F²/‖·‖² of the inputs
//! rather than with their dimensions. The crate provides:
//!
//! - [`matcore`]: a small dense matrix core (SVD, spectral norm, stable and
//!   nuclear rank, truncation, orthonormal bases) that the rest builds on;
//! - [`sketch`]: sketch construction, application, and row-count planning for
//!   the supported families, all deterministic given a seed;
//! - [`amm`]: the multiplication bound itself, error measurement, subspace
//!   embedding distortion, Monte-Carlo estimators, and a checker for the
//!   deterministic sufficient conditions;
//! - [`bss`]: deterministic row selection by a two-sided barrier walk, plus
//!   importance sampling as a randomized baseline;
//! - [`solvers`]: sketch-and-solve regression, low-rank approximation, and
//!   kernel ridge regression, with instance generators for experiments.
//!
//! Everything is plain `f64` dense storage; inputs are desk scale (dimensions
//! in the thousands), so clarity wins over blocking and parallel kernels.

pub mod amm;
pub mod bss;
pub mod matcore;
pub mod rng;
pub mod sketch;
pub mod solvers;

pub use matcore::{Matrix, SvdFactorization};
pub use sketch::{Sketch, SketchSpec};

use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A matrix argument contains NaN or infinite entries.
    #[error("matrix contains non-finite entries")]
    InvalidMatrix,
    /// The operation is undefined for an all-zero matrix.
    #[error("operation is undefined for the zero matrix")]
    ZeroMatrix,
    /// A basis argument fails the orthonormality check; the payload is the
    /// largest deviation |(UᵀU − I)_{ij}| observed.
    #[error("columns are not orthonormal (max deviation {0:.3e})")]
    NotOrthonormal(f64),
    /// Operand shapes do not line up; the payload states which.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    /// A transform requires a power-of-two length.
    #[error("length must be a power of two, got {0}")]
    InvalidLength(usize),
    /// A scalar parameter is outside its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    /// An input violates a stated norm budget.
    #[error("norm budget exceeded: {0}")]
    NormTooLarge(String),
    /// A barrier-walk invariant failed (wall crossed or potential blew up).
    #[error("barrier invariant violated: {0}")]
    BarrierBreach(String),
    /// The barrier walk found no row whose weight interval is nonempty.
    #[error("no feasible row at step {0}")]
    Infeasible(usize),
    /// Sketching lost column rank that the downstream solve relies on.
    #[error("sketched matrix has rank {got}, original has rank {want}")]
    RankCollapse { got: usize, want: usize },
    /// A linear system has no usable solution (singular at λ = 0).
    #[error("linear system is singular")]
    SingularSystem,
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
