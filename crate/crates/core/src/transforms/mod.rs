//! Multi-Gaussian transforms: RBIG with PCA or ICA rotations, projection
//! pursuit (PPMT) and flow anamorphosis (FA).

mod fit;
mod flow;
mod model;
mod projection;
mod rotation;

pub use fit::{
    fit_fa, fit_fa_transform, fit_ppmt, fit_ppmt_transform, fit_rbig, fit_rbig_transform, fit_transform, FaParams,
    MethodParams, PpmtParams, RbigParams, RotationKind, DEFAULT_ITERATIONS,
};
pub use flow::{fa_velocity, FaScratch, FaState, Standardizer};
pub use model::{
    mgt_forward, mgt_inverse, mgt_inverse_with, Method, MgtModel, ProjectionStep, RotationStep, Sphering, Step,
};
pub use projection::{find_max_index_direction, projection_index, SearchParams, DEFAULT_INDEX_ORDER, DEFAULT_RESTARTS};
pub use rotation::{ica_rotation, pca_rotation, IcaParams, IcaRotation};

#[cfg(test)]
mod tests;
