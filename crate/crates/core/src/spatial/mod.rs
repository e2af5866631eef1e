//! Spatial statistics: experimental variograms, MAF decorrelation,
//! variogram models and their fitting.

mod experimental;
mod maf;
mod model;

pub use experimental::{experimental_variograms, grid_variograms, Direction, LagSpec, VariogramSet};
pub use maf::{decorrelation_metrics, maf_apply, maf_fit, maf_invert, DecorrelationMetrics, MafModel};
pub use model::{fit_variogram, model_gamma, spherical, FitSpec, Spherical, VariogramFit, VariogramModel};
