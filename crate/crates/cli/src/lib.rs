#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Batch pipeline around the `geomgt` library: configuration, stages,
//! model persistence and report emission.

pub mod config;
pub mod error;
pub mod modelfile;
pub mod pipeline;

pub use config::PipelineConfig;
pub use error::{CliError, CliResult};
pub use modelfile::{load_model, save_model, ModelBundle, Provenance, FORMAT_VERSION};
pub use pipeline::{run_stage, Layout, Stage, StageTiming};
