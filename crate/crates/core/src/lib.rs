//! Mirror coupling of Brownian motions and Monte Carlo evaluation of magnetic
//! Schrödinger semigroups through the Feynman-Kac-Itô formula.
//!
//! The crate is organised bottom-up:
//!
//! * [`stochastic`]: time grids, counter-based random streams, Brownian paths,
//!   the mirror coupling and the exact law of its coupling time.
//! * [`action`]: field bundles and the discretised magnetic action functional,
//!   including the coupled decomposition into a martingale and a Lebesgue part.
//! * [`kato`]: Gaussian smoothing by quadrature, the α-Kato functional and the
//!   derived constants that enter the Hölder estimates.
//! * [`potentials`]: molecular Coulomb potentials, lifted one-body magnetic
//!   potentials and the canonical test fields.
//! * [`semigroup`]: Feynman-Kac-Itô estimators and coupled pair differences.
//! * [`verify`]: experiment drivers that turn the estimates into exponent fits.
//!
//! All Monte Carlo routines are deterministic functions of their seed: every
//! path draws from its own stream keyed by `(seed, path index)` and sums are
//! reduced in a fixed pairwise order, so results do not depend on the number
//! of worker threads.

// NaN-rejecting guards are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod action;
pub mod error;
pub mod estimate;
pub mod kato;
pub mod potentials;
pub mod quadrature;
pub mod report;
pub mod semigroup;
pub mod stochastic;
pub mod verify;

pub use action::FieldSpec;
pub use error::{Error, Result};
pub use estimate::McEstimate;
