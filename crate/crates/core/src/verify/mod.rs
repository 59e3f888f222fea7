//! Experiment drivers: Hölder fits, the coupling inequality scan, the
//! seminorm scaling in `t` and the refinement ladder of the action identity.

mod experiments;
mod fit;

pub use experiments::{
    nase_residual_experiment, normal_cdf, smoothing_experiment, theorem_main_experiment, ExponentFit,
    MainExperiment, MainReport, NaseExperiment, NaseReport, SmoothingBackend, SmoothingReport, BOOTSTRAP_BLOCKS,
    MAIN_TARGET, NASE_TARGET, SMOOTHING_TARGET,
};
pub use fit::{
    block_bootstrap_slope, holder_fit, least_squares, loglog_fit, percentile_interval, HolderFit, LineFit,
    PairSet, BOOTSTRAP_RESAMPLES, MIN_SCALES,
};
