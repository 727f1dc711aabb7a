//! Non-Markovian open-quantum-system dynamics built on the hierarchical
//! equations of motion (HEOM).
//!
//! The crate provides:
//!
//! * [`bath`] — spectral densities, exponential expansion of the bath
//!   correlation function (including Matsubara terms and discretized
//!   undamped-mode baths), and bath diagnostics.
//! * [`hierarchy`] — enumeration and neighbor maps for the auxiliary
//!   density operator (ADO) index space under level or per-mode-cap
//!   truncation.
//! * [`dense`] — the reference dense propagator for the full hierarchy
//!   and its second-order (time-convolution) restriction.
//! * [`ttheom`], [`ksl`], [`ttprop`] — the tensor-train form of the HEOM
//!   super-Liouvillian, the projector-splitting low-rank integrator, and
//!   the mixed KSL/Runge-Kutta propagation loop.
//! * [`observables`], [`spectra`] — reduced density matrices, dynamical
//!   map diagnostics (state-space volume, canonical rates, Choi matrix)
//!   and linear absorption/emission spectra.
//!
//! All internal quantities are in Hartree atomic units; [`units`] holds
//! the conversion constants used at the I/O boundary.

pub mod bath;
pub mod checkpoint;
pub mod csvio;
pub mod dense;
pub mod hierarchy;
pub mod integrator;
pub mod ksl;
pub mod numerics;
pub mod observables;
pub mod report;
pub mod smallmat;
pub mod spectra;
pub mod system;
pub mod ttheom;
pub mod ttprop;
pub mod units;

pub use heom_tt::{self as tt, TtOperator, TtVector};

use thiserror::Error;

pub type C64 = num_complex::Complex64;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("convergence failure: {0}")]
    Convergence(String),
    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),
    #[error("numerical failure: {0}")]
    Numerics(String),
    #[error(transparent)]
    Tt(#[from] heom_tt::TtError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
