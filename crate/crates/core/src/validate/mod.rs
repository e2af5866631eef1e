//! Multivariate normality tests, reproduction metrics and synthetic cases.

mod metrics;
mod mvn;
mod synth;

pub use metrics::{cdf_rmse, variogram_rmse, BoxStats, CorrelationReproduction, PairRmse, ValidationReport};
pub use mvn::{
    energy_test, energy_test_with_null, expected_distance_to_normal, expected_normal_distance, hz_beta, hz_test,
    EnergyNull, MvnMethod, MvnResult, DEFAULT_REPLICATES,
};
pub use synth::{quasi_random_locations, synth_case, synth_map, SynthKind, SynthSpec};
