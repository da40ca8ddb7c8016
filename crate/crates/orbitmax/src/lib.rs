//! Maximum-entropy distributions on adjoint orbits of compact classical Lie
//! groups.
//!
//! Given a compact classical group G (unitary, special unitary, orthogonal,
//! or compact symplectic), a point F in its Cartan subalgebra, and a target
//! mean A inside the orbit polytope, the library finds the distribution on
//! the adjoint orbit O(F) = {g F g⁻¹} that has mean A and maximum entropy
//! relative to the invariant measure. That distribution is an exponential
//! family ν°(X) ∝ e^{−⟨Y°,X⟩}, and Y° is found by minimizing the convex dual
//!
//! ```text
//! f_A(Y) = ⟨Y, A⟩ + log ∫_{O(F)} e^{−⟨Y,X⟩} dμ_F(X)
//! ```
//!
//! over the Cartan subalgebra, where ⟨X,Y⟩ = −Re Tr(XY). The log-integral
//! and its gradient have closed determinantal forms (Harish-Chandra /
//! Itzykson–Zuber and their orthogonal/symplectic analogues), so the dual is
//! minimized by the ellipsoid method with an exact first-order oracle.
//!
//! Module map:
//!
//! * [`lie_core`] — group/algebra metadata, orthonormal Cartan bases, matrix
//!   realizations, the invariant inner product, affine equalities of the
//!   orbit, Weyl-orbit enumeration.
//! * [`hc_oracle`] — the closed-form log-integral E_F(Y) and its gradient,
//!   with confluent (repeated/zero coordinate) limits and log-domain
//!   determinant evaluation.
//! * [`geometry`] — Kostant projection, orbit-polytope membership and margin,
//!   bounding-radius / balancedness closed forms.
//! * [`solver`] — the central-cut ellipsoid loop plus a Newton polish, and
//!   density reconstruction.
//! * [`mc_validate`] — Haar samplers and Monte-Carlo estimators used as
//!   independent oracles for everything above.
//! * [`cli_io`] — JSON problem files, result serialization, and the command
//!   dispatcher behind the `orbitmax` binary.

pub mod cli_io;
pub mod geometry;
pub mod hc_oracle;
pub mod lie_core;
mod linalg;
pub mod mc_validate;
pub mod solver;

pub use lie_core::{CartanVector, Family, GroupSpec};

/// Crate-wide error type. Every variant carries a stable machine-readable
/// code (see [`Error::code`]) that the CLI prints on stderr and maps to an
/// exit status.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("SOeven with n = 1 is Abelian-degenerate and unsupported; use n >= 2")]
    DegenerateFamily,
    #[error("size parameter n must be a positive integer")]
    BadSize,
    #[error("coordinate vector has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("SU coordinates must sum to zero (got sum {sum:.3e})")]
    SuSumNonzero { sum: f64 },
    #[error("matrix is not in the group: residual {residual:.3e}")]
    NotInGroup { residual: f64 },
    #[error("matrix is not in the Lie algebra: residual {residual:.3e}")]
    NotInAlgebra { residual: f64 },
    #[error("rank {rank} exceeds the Weyl-orbit enumeration cap {cap}")]
    RankCapExceeded { rank: usize, cap: usize },
    #[error("coincidence pattern inconsistent with inputs: {reason}")]
    PatternMismatch { reason: String },
    #[error(
        "log-domain cancellation of {magnitude:.1} nats exhausts double precision \
         (largest exponent scale {scale:.3e})"
    )]
    NumericOverflow { magnitude: f64, scale: f64 },
    #[error("problem is infeasible: {reason}")]
    Infeasible { reason: String },
    #[error("O(2n) is integration-only; the solver requires a connected group")]
    IntegrationOnly,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Stable machine-readable code, printed by the CLI on stderr.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DegenerateFamily => "DEGENERATE_FAMILY",
            Error::BadSize => "BAD_SIZE",
            Error::LengthMismatch { .. } => "LENGTH_MISMATCH",
            Error::SuSumNonzero { .. } => "SU_SUM_NONZERO",
            Error::NotInGroup { .. } => "NOT_IN_GROUP",
            Error::NotInAlgebra { .. } => "NOT_IN_ALGEBRA",
            Error::RankCapExceeded { .. } => "RANK_CAP_EXCEEDED",
            Error::PatternMismatch { .. } => "PATTERN_MISMATCH",
            Error::NumericOverflow { .. } => "NUMERIC_OVERFLOW",
            Error::Infeasible { .. } => "INFEASIBLE",
            Error::IntegrationOnly => "INTEGRATION_ONLY",
            Error::InvalidInput(_) => "INVALID_INPUT",
        }
    }

    /// Process exit status used by the CLI: 2 = problem-definition error,
    /// 3 = infeasible instance, 4 = numeric overflow.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NumericOverflow { .. } => 4,
            Error::Infeasible { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
