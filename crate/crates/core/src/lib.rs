#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::excessive_precision)]

pub mod error;
pub mod linalg;
pub mod marginal;
pub mod rng;
pub mod sampledata;
pub mod scalar;
pub mod simulate;
pub mod spatial;
pub mod stats;
pub mod transforms;
pub mod validate;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision instantiations.
pub mod f64 {
    pub type SampleTable = crate::sampledata::SampleTable<f64>;
    pub type GaussianTable = crate::marginal::GaussianTable<f64>;
    pub type MgtModel = crate::transforms::MgtModel<f64>;
    pub type MafModel = crate::spatial::MafModel<f64>;
    pub type VariogramModel = crate::spatial::VariogramModel<f64>;
    pub type VariogramSet = crate::spatial::VariogramSet<f64>;
    pub type RealizationSet = crate::simulate::RealizationSet<f64>;
}

/// Single-precision instantiations.
pub mod f32 {
    pub type SampleTable = crate::sampledata::SampleTable<f32>;
    pub type GaussianTable = crate::marginal::GaussianTable<f32>;
    pub type MgtModel = crate::transforms::MgtModel<f32>;
    pub type MafModel = crate::spatial::MafModel<f32>;
    pub type VariogramModel = crate::spatial::VariogramModel<f32>;
    pub type VariogramSet = crate::spatial::VariogramSet<f32>;
    pub type RealizationSet = crate::simulate::RealizationSet<f32>;
}
