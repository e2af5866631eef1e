//! Fitted multi-Gaussian transform: an ordered list of invertible steps.

use ndarray::{Array1, Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marginal::{GaussianTable, Tails};
use crate::scalar::Real;

use super::flow::{FaScratch, FaState, Standardizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    RbigPca,
    RbigIca,
    Ppmt,
    Fa,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::RbigPca, Method::RbigIca, Method::Ppmt, Method::Fa];

    pub fn name(self) -> &'static str {
        match self {
            Method::RbigPca => "rbig-pca",
            Method::RbigIca => "rbig-ica",
            Method::Ppmt => "ppmt",
            Method::Fa => "fa",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

/// Rotation `y = R·x` followed by per-coordinate Gaussianization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RotationStep<T: Real> {
    pub rotation: Array2<T>,
    pub tables: Vec<GaussianTable<T>>,
    /// Set when ICA did not converge and PCA was used instead.
    pub ica_fallback: bool,
}

/// Gaussianization of the projection on `direction`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ProjectionStep<T: Real> {
    pub direction: Array1<T>,
    pub table: GaussianTable<T>,
    pub index: T,
}

/// Affine whitening `y = (x − center)·matrix`; `inverse` undoes `matrix`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Sphering<T: Real> {
    pub center: Array1<T>,
    pub matrix: Array2<T>,
    pub inverse: Array2<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", tag = "kind", rename_all = "kebab-case")]
pub enum Step<T: Real> {
    Rotation(RotationStep<T>),
    Projection(ProjectionStep<T>),
    Flow(FaState<T>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MgtModel<T: Real> {
    pub method: Method,
    pub dim: usize,
    pub initial: Vec<GaussianTable<T>>,
    pub sphering: Option<Sphering<T>>,
    pub steps: Vec<Step<T>>,
    /// Optional re-standardization of the final factors.
    pub output: Option<Standardizer<T>>,
    /// One value per iteration or pass (see the fitting routine).
    pub diagnostics: Vec<T>,
}

impl<T: Real> MgtModel<T> {
    /// Number of anchors the flow steps evaluate per velocity call.
    pub fn flow_anchor_count(&self) -> usize {
        self.steps
            .iter()
            .map(|s| match s {
                Step::Flow(f) => f.anchors().nrows(),
                _ => 0,
            })
            .max()
            .unwrap_or(0)
    }

    fn scratch(&self) -> FaScratch<T> {
        FaScratch::new(self.dim, self.flow_anchor_count())
    }

    /// Forward map of one point in place.
    pub fn forward_point(&self, x: &mut [T], scratch: &mut FaScratch<T>) -> Result<()> {
        for (v, t) in x.iter_mut().zip(&self.initial) {
            *v = t.forward_unchecked(*v);
        }
        if let Some(s) = &self.sphering {
            sphere(x, s);
        }
        for step in &self.steps {
            match step {
                Step::Rotation(r) => {
                    rotate(x, &r.rotation, false);
                    for (v, t) in x.iter_mut().zip(&r.tables) {
                        *v = t.forward_unchecked(*v);
                    }
                }
                Step::Projection(p) => {
                    let dir = p.direction.as_slice().expect("contiguous");
                    let proj = dot(x, dir);
                    let shift = p.table.forward_unchecked(proj) - proj;
                    for (v, &u) in x.iter_mut().zip(dir) {
                        *v += u * shift;
                    }
                }
                Step::Flow(f) => f.forward_point(x, scratch)?,
            }
        }
        if let Some(o) = &self.output {
            o.apply(x);
        }
        Ok(())
    }

    /// Inverse map of one point in place.
    pub fn inverse_point(&self, y: &mut [T], scratch: &mut FaScratch<T>) -> Result<()> {
        self.inverse_point_with(y, Tails::Linear, scratch)
    }

    /// Inverse map of one point in place with the given table tail rule.
    pub fn inverse_point_with(&self, y: &mut [T], tails: Tails, scratch: &mut FaScratch<T>) -> Result<()> {
        if let Some(o) = &self.output {
            o.invert(y);
        }
        for step in self.steps.iter().rev() {
            match step {
                Step::Rotation(r) => {
                    for (v, t) in y.iter_mut().zip(&r.tables) {
                        *v = t.inverse_tails(*v, tails);
                    }
                    rotate(y, &r.rotation, true);
                }
                Step::Projection(p) => {
                    let dir = p.direction.as_slice().expect("contiguous");
                    let q = dot(y, dir);
                    let shift = p.table.inverse_tails(q, tails) - q;
                    for (v, &u) in y.iter_mut().zip(dir) {
                        *v += u * shift;
                    }
                }
                Step::Flow(f) => f.inverse_point(y, scratch)?,
            }
        }
        if let Some(s) = &self.sphering {
            unsphere(y, s);
        }
        for (v, t) in y.iter_mut().zip(&self.initial) {
            *v = t.inverse_tails(*v, tails);
        }
        Ok(())
    }
}

pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub(crate) fn rotate<T: Real>(x: &mut [T], r: &Array2<T>, transpose: bool) {
    let d = x.len();
    let mut out = [T::zero(); 16];
    let mut heap;
    let buf: &mut [T] = if d <= 16 {
        &mut out[..d]
    } else {
        heap = vec![T::zero(); d];
        &mut heap
    };
    for (i, o) in buf.iter_mut().enumerate() {
        *o = (0..d).map(|j| if transpose { r[[j, i]] } else { r[[i, j]] } * x[j]).sum();
    }
    x.copy_from_slice(buf);
}

pub(crate) fn sphere<T: Real>(x: &mut [T], s: &Sphering<T>) {
    for (v, &c) in x.iter_mut().zip(s.center.iter()) {
        *v -= c;
    }
    // Row vector times matrix = matrixᵀ·x.
    rotate(x, &s.matrix, true);
}

fn unsphere<T: Real>(y: &mut [T], s: &Sphering<T>) {
    rotate(y, &s.inverse, true);
    for (v, &c) in y.iter_mut().zip(s.center.iter()) {
        *v += c;
    }
}

fn check_input<T: Real>(model: &MgtModel<T>, points: ArrayView2<T>) -> Result<()> {
    if points.ncols() != model.dim {
        return Err(Error::DimensionMismatch { expected: model.dim, found: points.ncols() });
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite coordinate".into()));
    }
    Ok(())
}

fn map_rows<T: Real>(
    model: &MgtModel<T>,
    points: ArrayView2<T>,
    f: impl Fn(&MgtModel<T>, &mut [T], &mut FaScratch<T>) -> Result<()> + Sync,
) -> Result<Array2<T>> {
    check_input(model, points)?;
    let (m, d) = points.dim();
    let mut buf: Vec<T> = points.iter().copied().collect();
    if d > 0 {
        buf.par_chunks_mut(d).try_for_each_init(|| model.scratch(), |s, row| f(model, row, s))?;
    }
    Ok(Array2::from_shape_vec((m, d), buf).expect("shape preserved"))
}

/// Applies the fitted transform to arbitrary points (rows).
pub fn mgt_forward<T: Real>(model: &MgtModel<T>, points: ArrayView2<T>) -> Result<Array2<T>> {
    map_rows(model, points, |m, row, s| m.forward_point(row, s))
}

/// Maps factors back to the original variable space.
pub fn mgt_inverse<T: Real>(model: &MgtModel<T>, factors: ArrayView2<T>) -> Result<Array2<T>> {
    mgt_inverse_with(model, factors, Tails::Linear)
}

/// [`mgt_inverse`] with a chosen tail rule for every Gaussian table.
pub fn mgt_inverse_with<T: Real>(model: &MgtModel<T>, factors: ArrayView2<T>, tails: Tails) -> Result<Array2<T>> {
    map_rows(model, factors, |m, row, s| m.inverse_point_with(row, tails, s))
}
