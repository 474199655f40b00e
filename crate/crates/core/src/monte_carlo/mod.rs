//! Euler–Maruyama ensembles, the density-ratio process along reversed paths
//! and its martingale diagnostics.

mod diagnostics;
mod paths;
mod ratio;

pub use diagnostics::{
    entropy_consistency, martingale_diagnostics, EntropyConsistency, MartingaleReport, DRIFT_Z_THRESHOLD, MIN_PATHS,
};
pub use paths::{
    path_rng, simulate_forward, simulate_reversed, simulate_with_drift, Direction, Init, PathEnsemble, SimOptions,
    BLOW_UP,
};
pub use ratio::{
    density_ratio_process, exponential_girsanov_process, median_relative_deviation, RatioSeries, RatioSource,
    D_FLOOR, MAX_CLAMPED_FRACTION,
};
