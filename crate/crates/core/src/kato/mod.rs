//! Gaussian smoothing by quadrature, the α-Kato functional and derived constants.

mod functional;
mod integrand;
mod moment;
mod smoothing;

pub use functional::{
    dv_profile, kato_functional, kato_integral, kato_membership_probe, magnetic_constant,
    KatoProbe, KatoQuery, KatoValue, Lattice, MagneticConstant, PROBE_MIN_DECAY,
};
pub use integrand::{Integrand, RadialFn, RadialProfile, ScalarFn};
pub use moment::{exp_moment, EXP_CEILING};
pub use smoothing::{gaussian_expectation, QuadSpec};
