//! Fitting routines for the four transforms.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::marginal::{build_gaussian_table, GaussianTable, MarginalMode};
use crate::rng;
use crate::scalar::Real;

use super::flow::{FaState, Standardizer};
use super::model::{dot, mgt_forward, rotate, sphere, Method, MgtModel, ProjectionStep, RotationStep, Sphering, Step};
use super::projection::{find_max_index_direction, index_f64, SearchParams, DEFAULT_INDEX_ORDER};
use super::rotation::{ica_rotation, pca_rotation, IcaParams};

pub const DEFAULT_ITERATIONS: usize = 150;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RotationKind {
    Pca,
    Ica,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RbigParams {
    pub iterations: usize,
    pub rotation: RotationKind,
    pub marginal: MarginalMode,
    pub ica: IcaParams,
}

impl Default for RbigParams {
    fn default() -> Self {
        Self {
            iterations: DEFAULT_ITERATIONS,
            rotation: RotationKind::Pca,
            marginal: MarginalMode::NormalScore,
            ica: IcaParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpmtParams {
    pub iterations: usize,
    pub restarts: usize,
    pub index_order: usize,
    pub seed: u64,
}

impl Default for PpmtParams {
    fn default() -> Self {
        Self { iterations: DEFAULT_ITERATIONS, restarts: 100, index_order: DEFAULT_INDEX_ORDER, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FaParams {
    pub sigma0: f64,
    pub sigma1: f64,
    pub steps: usize,
    pub chain: usize,
    /// Re-standardize the final factors to zero mean and unit variance.
    pub standardize_output: bool,
}

impl Default for FaParams {
    fn default() -> Self {
        Self { sigma0: 0.1, sigma1: 1.1, steps: 30, chain: 2, standardize_output: false }
    }
}

/// Parameters for any of the four methods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum MethodParams {
    Rbig(RbigParams),
    Ppmt(PpmtParams),
    Fa(FaParams),
}

impl MethodParams {
    pub fn method(&self) -> Method {
        match self {
            MethodParams::Rbig(p) if p.rotation == RotationKind::Pca => Method::RbigPca,
            MethodParams::Rbig(_) => Method::RbigIca,
            MethodParams::Ppmt(_) => Method::Ppmt,
            MethodParams::Fa(_) => Method::Fa,
        }
    }

    /// Recommended settings for a method.
    pub fn recommended(method: Method) -> Self {
        match method {
            Method::RbigPca => MethodParams::Rbig(RbigParams {
                marginal: MarginalMode::histogram_equalization(),
                ..Default::default()
            }),
            Method::RbigIca => MethodParams::Rbig(RbigParams { rotation: RotationKind::Ica, ..Default::default() }),
            Method::Ppmt => MethodParams::Ppmt(PpmtParams::default()),
            Method::Fa => MethodParams::Fa(FaParams::default()),
        }
    }
}

fn unit_weights<T: Real>(n: usize, weights: Option<ArrayView1<T>>) -> Result<Array1<T>> {
    match weights {
        Some(w) if w.len() != n => Err(Error::DimensionMismatch { expected: n, found: w.len() }),
        Some(w) => Ok(w.to_owned()),
        None => Ok(Array1::from_elem(n, T::one())),
    }
}

fn check_data<T: Real>(data: ArrayView2<T>, iterations: usize) -> Result<()> {
    let (n, d) = data.dim();
    if n == 0 || d == 0 {
        return Err(Error::EmptyData);
    }
    if n <= d {
        return Err(Error::InvalidInput(format!("need more rows ({n}) than variables ({d})")));
    }
    if iterations == 0 {
        return Err(Error::InvalidInput("iterations must be at least 1".into()));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite value in data".into()));
    }
    Ok(())
}

/// Builds one table per column and Gaussianizes `x` in place.
fn gaussianize_columns<T: Real>(x: &mut Array2<T>, w: &[T], mode: MarginalMode) -> Result<Vec<GaussianTable<T>>> {
    let mut tables = Vec::with_capacity(x.ncols());
    for mut col in x.columns_mut() {
        let values: Vec<T> = col.to_vec();
        let table = build_gaussian_table(&values, w, mode)?;
        col.mapv_inplace(|v| table.forward_unchecked(v));
        tables.push(table);
    }
    Ok(tables)
}

/// Largest Legendre projection index over the coordinate axes.
fn max_axis_index<T: Real>(x: ArrayView2<T>) -> T {
    let best = x
        .columns()
        .into_iter()
        .filter_map(|c| {
            let v: Vec<f64> = c.iter().map(|a| a.as_f64()).collect();
            index_f64(&v, DEFAULT_INDEX_ORDER)
        })
        .fold(0.0, f64::max);
    T::lit(best)
}

/// Rotation for one RBIG iteration. ICA runs on the PCA-whitened data and is
/// composed with the PCA rotation.
fn rbig_rotation<T: Real>(x: ArrayView2<T>, w: ArrayView1<T>, params: &RbigParams) -> Result<(Array2<T>, bool)> {
    let pca = pca_rotation(x, Some(w))?;
    if params.rotation == RotationKind::Pca || x.ncols() == 1 {
        return Ok((pca, false));
    }
    let (mean, cov) = linalg::weighted_covariance(x, w);
    let scale: Vec<T> = pca
        .rows()
        .into_iter()
        .map(|r| {
            let v = r.dot(&cov.dot(&r));
            T::one() / v.sqrt()
        })
        .collect();
    let mut white = linalg::apply_rows((&x - &mean).view(), pca.view());
    for (j, mut col) in white.columns_mut().into_iter().enumerate() {
        col.mapv_inplace(|v| v * scale[j]);
    }
    let ica = ica_rotation(white.view(), Some(w), params.ica)?;
    if ica.fell_back {
        return Ok((pca, true));
    }
    Ok((ica.matrix.dot(&pca), false))
}

/// Fits RBIG and returns the model with the transformed training data.
pub fn fit_rbig_transform<T: Real>(
    data: ArrayView2<T>,
    weights: Option<ArrayView1<T>>,
    params: &RbigParams,
) -> Result<(MgtModel<T>, Array2<T>)> {
    check_data(data, params.iterations)?;
    let w = unit_weights(data.nrows(), weights)?;
    let ws = w.as_slice().expect("contiguous");
    let mut x = data.to_owned();
    let initial = gaussianize_columns(&mut x, ws, params.marginal)?;
    let mut steps = Vec::with_capacity(params.iterations);
    let mut diagnostics = Vec::with_capacity(params.iterations);
    for _ in 0..params.iterations {
        let (rotation, ica_fallback) = rbig_rotation(x.view(), w.view(), params)?;
        for mut row in x.rows_mut() {
            rotate(row.as_slice_mut().expect("standard layout"), &rotation, false);
        }
        diagnostics.push(max_axis_index(x.view()));
        let tables = gaussianize_columns(&mut x, ws, params.marginal)?;
        steps.push(Step::Rotation(RotationStep { rotation, tables, ica_fallback }));
    }
    let method = match params.rotation {
        RotationKind::Pca => Method::RbigPca,
        RotationKind::Ica => Method::RbigIca,
    };
    let model = MgtModel { method, dim: data.ncols(), initial, sphering: None, steps, output: None, diagnostics };
    Ok((model, x))
}

/// Rotation-based iterative Gaussianization.
pub fn fit_rbig<T: Real>(
    data: ArrayView2<T>,
    weights: Option<ArrayView1<T>>,
    params: &RbigParams,
) -> Result<MgtModel<T>> {
    fit_rbig_transform(data, weights, params).map(|(m, _)| m)
}

/// Fits PPMT and returns the model with the transformed training data.
pub fn fit_ppmt_transform<T: Real>(
    data: ArrayView2<T>,
    weights: Option<ArrayView1<T>>,
    params: &PpmtParams,
) -> Result<(MgtModel<T>, Array2<T>)> {
    check_data(data, params.iterations)?;
    let (n, d) = data.dim();
    let w = unit_weights(n, weights)?;
    let ws = w.as_slice().expect("contiguous");
    let mut x = data.to_owned();
    let initial = gaussianize_columns(&mut x, ws, MarginalMode::NormalScore)?;
    let mut model = MgtModel {
        method: Method::Ppmt,
        dim: d,
        initial,
        sphering: None,
        steps: Vec::new(),
        output: None,
        diagnostics: Vec::new(),
    };
    if d == 1 {
        return Ok((model, x));
    }
    let (center, cov) = linalg::weighted_covariance(x.view(), w.view());
    let matrix = linalg::inv_sqrt_sym(&cov)?;
    let inverse = linalg::sqrt_sym(&cov)?;
    let sphering = Sphering { center, matrix, inverse };
    for mut row in x.rows_mut() {
        sphere(row.as_slice_mut().expect("standard layout"), &sphering);
    }
    model.sphering = Some(sphering);

    let search = SearchParams { restarts: params.restarts, order: params.index_order, ..Default::default() };
    for it in 0..params.iterations {
        let seed = rng::derive_seed(params.seed, it as u64);
        let (direction, index) = find_max_index_direction(x.view(), seed, search)?;
        let dir = direction.as_slice().expect("contiguous");
        let proj: Vec<T> = x.rows().into_iter().map(|r| dot(r.as_slice().expect("standard layout"), dir)).collect();
        let table = build_gaussian_table(&proj, ws, MarginalMode::NormalScore)?;
        for (mut row, &p) in x.rows_mut().into_iter().zip(&proj) {
            let shift = table.forward_unchecked(p) - p;
            for (v, &u) in row.iter_mut().zip(dir) {
                *v += u * shift;
            }
        }
        model.diagnostics.push(index);
        model.steps.push(Step::Projection(ProjectionStep { direction, table, index }));
    }
    Ok((model, x))
}

/// Projection pursuit multivariate transform.
pub fn fit_ppmt<T: Real>(
    data: ArrayView2<T>,
    weights: Option<ArrayView1<T>>,
    params: &PpmtParams,
) -> Result<MgtModel<T>> {
    fit_ppmt_transform(data, weights, params).map(|(m, _)| m)
}

/// Fits the chained flow anamorphosis and returns the model with the
/// transformed training data. Diagnostics hold the largest axis projection
/// index after each pass.
pub fn fit_fa_transform<T: Real>(data: ArrayView2<T>, params: &FaParams) -> Result<(MgtModel<T>, Array2<T>)> {
    let (n, d) = data.dim();
    if n < 2 || d == 0 {
        return Err(Error::EmptyData);
    }
    if params.chain == 0 {
        return Err(Error::InvalidInput("chain must be at least 1".into()));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite value in data".into()));
    }
    let mut model = MgtModel {
        method: Method::Fa,
        dim: d,
        initial: Vec::new(),
        sphering: None,
        steps: Vec::new(),
        output: None,
        diagnostics: Vec::new(),
    };
    let mut x = data.to_owned();
    for _ in 0..params.chain {
        let standardizer = Standardizer::fit(x.view())?;
        let anchors = standardizer.apply_rows(x.view());
        let state = FaState::new(anchors, T::lit(params.sigma0), T::lit(params.sigma1), params.steps, standardizer)?;
        let pass = MgtModel {
            method: Method::Fa,
            dim: d,
            initial: Vec::new(),
            sphering: None,
            steps: vec![Step::Flow(state.clone())],
            output: None,
            diagnostics: Vec::new(),
        };
        x = mgt_forward(&pass, x.view())?;
        model.diagnostics.push(max_axis_index(x.view()));
        model.steps.push(Step::Flow(state));
    }
    if params.standardize_output {
        let out = Standardizer::fit(x.view())?;
        x = out.apply_rows(x.view());
        model.output = Some(out);
    }
    Ok((model, x))
}

/// Flow anamorphosis.
pub fn fit_fa<T: Real>(data: ArrayView2<T>, params: &FaParams) -> Result<MgtModel<T>> {
    fit_fa_transform(data, params).map(|(m, _)| m)
}

/// Fits any method and returns the model with the training factors.
pub fn fit_transform<T: Real>(
    data: ArrayView2<T>,
    weights: Option<ArrayView1<T>>,
    params: &MethodParams,
) -> Result<(MgtModel<T>, Array2<T>)> {
    match params {
        MethodParams::Rbig(p) => fit_rbig_transform(data, weights, p),
        MethodParams::Ppmt(p) => fit_ppmt_transform(data, weights, p),
        MethodParams::Fa(p) => fit_fa_transform(data, p),
    }
}
