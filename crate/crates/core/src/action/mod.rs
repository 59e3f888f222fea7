//! Field bundles and the discretised magnetic action.
//!
//! For a real vector potential the action `𝒮ₜ(A|Z) = i∫<A(Z), dZ> + (i/2)∫div A(Z) ds`
//! is purely imaginary, so only the phase `θ` with `𝒮 = iθ` is stored. All sums
//! use left-point (Itô) evaluation.

mod field;
mod phase;

pub use field::{FieldMeta, FieldSpec, ScalarFn, VectorFn};
pub(crate) use phase::{phase_factor, PhaseAcc};
pub use phase::{
    action_phase, decompose_coupled_action, divergence_integral, ito_integral,
    ActionDecomposition, ActionSample,
};
