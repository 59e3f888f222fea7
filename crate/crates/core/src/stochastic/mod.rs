//! Brownian paths, random streams and the mirror coupling.

pub mod coupling;
pub mod path;
pub mod rng;

pub(crate) use coupling::{CoupledWalk, StepKind};
pub use coupling::{
    coupling_steps, coupling_survival_bound, coupling_survival_exact, couple_path,
    detect_crossing, maximality_deficit, mirror_couple, reflect, survival_curve, CoupledPaths,
    Crossing, MirrorGeometry,
};
pub use path::{heat_kernel, sample_path, BrownianPath, TimeGrid};
pub use rng::{derive_seed, RngStream};
