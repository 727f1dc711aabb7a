//! Tensor-train (TT, a.k.a. matrix product) vectors and operators over
//! complex scalars.
//!
//! A TT vector stores an order-`d` tensor as a chain of 3-way cores
//! `A_i` of shape `(r_i, m_i, r_{i+1})` with boundary ranks
//! `r_0 = r_d = 1`; a TT operator stores 4-way cores
//! `(r_i, m_i, m_i', r_{i+1})` acting on matching mode sizes. The
//! interior ranks (bonds) control both accuracy and storage.
//!
//! The algebra provided here is the minimum needed to assemble and
//! propagate large linear ODE systems in TT form: exact Kronecker
//! products and sums, operator application, SVD-based rounding back to
//! near-minimal ranks, inner products and single-element extraction.
//! Dense conversions are intended for small oracle problems and tests.
//!
//! Truncation follows the distributed-error convention: at each bond,
//! singular values are discarded while the discarded tail 2-norm stays
//! below `eps * ||sigma||_2 / sqrt(n_bonds)`, and the kept rank is
//! always capped at `rmax`. SVD factors carry a deterministic phase
//! (largest-magnitude entry of each left singular vector made real
//! positive) so repeated runs produce identical cores.

use openblas_src as _;

pub mod dense;
pub mod linalg;
pub mod operator;
pub mod vector;

pub use dense::DenseTensor;
pub use operator::TtOperator;
pub use vector::TtVector;

use thiserror::Error;

pub type C64 = num_complex::Complex64;

#[derive(Debug, Error)]
pub enum TtError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
    #[error("invalid tensor-train: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, TtError>;

/// Outcome of a rounding pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RoundInfo {
    /// True when `rmax` cut singular values that `eps` alone would have kept.
    pub rank_capped: bool,
}

impl RoundInfo {
    pub fn merge(self, other: RoundInfo) -> RoundInfo {
        RoundInfo { rank_capped: self.rank_capped || other.rank_capped }
    }
}
