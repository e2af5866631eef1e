//! Conditional turning-bands simulation on block grids.

mod conditional;
mod grid;
mod kriging;
mod spectral;

pub use conditional::{realization_seed, simulate_conditional, RealizationSet, SimParams};
pub use grid::GridSpec;
pub use kriging::{kriging_weights, neighborhood_search, simple_krige, NeighborhoodSpec};
pub use spectral::{
    fibonacci_directions, turning_bands_at_points, turning_bands_unconditional, SpectralField, TbParams,
    DEFAULT_HARMONICS, DEFAULT_LINES, MIN_LINES,
};
