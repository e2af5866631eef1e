//! Minimum/maximum autocorrelation factors and decorrelation metrics.

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;

use super::experimental::{variogram_matrix_at, VariogramSet};

/// Linear decorrelation `Y_maf = Y·M` with `M = S^{-1/2}·Q_h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MafModel<T: Real> {
    /// Symmetric inverse square root of the factor covariance.
    pub sphering: Array2<T>,
    /// Eigenvectors (columns) of the sphered variogram matrix at `lag`,
    /// ascending eigenvalues.
    pub rotation: Array2<T>,
    pub eigenvalues: Array1<T>,
    pub lag: T,
    pub tolerance: T,
    pub pairs: u64,
    pub matrix: Array2<T>,
}

impl<T: Real> MafModel<T> {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// A model that leaves factors unchanged.
    pub fn identity(d: usize) -> Self {
        Self {
            sphering: Array2::eye(d),
            rotation: Array2::eye(d),
            eigenvalues: Array1::zeros(d),
            lag: T::zero(),
            tolerance: T::zero(),
            pairs: 0,
            matrix: Array2::eye(d),
        }
    }
}

/// Fits MAF on factors (n×d) at coordinates (n×3) using lag class
/// `[lag − tolerance, lag + tolerance)`.
pub fn maf_fit<T: Real>(factors: ArrayView2<T>, coords: ArrayView2<T>, lag: T, tolerance: T) -> Result<MafModel<T>> {
    let (n, d) = factors.dim();
    if n <= d {
        return Err(Error::InvalidInput(format!("MAF needs more rows ({n}) than variables ({d})")));
    }
    let (_, cov) = linalg::covariance(factors);
    let sphering = linalg::inv_sqrt_sym(&cov)?;
    let sphered = factors.dot(&sphering);
    let (gamma, pairs) = variogram_matrix_at(coords, sphered.view(), lag.as_f64(), tolerance.as_f64())?;
    if pairs == 0 {
        return Err(Error::Fit(format!("no sample pairs at lag {lag} (tolerance {tolerance})")));
    }
    let sym = (&gamma + &gamma.t()) / T::lit(2.0);
    let (eigenvalues, mut rotation) = linalg::sym_eigen(&sym);
    for k in 0..d {
        linalg::canonical_sign(rotation.column_mut(k));
    }
    let matrix = sphering.dot(&rotation);
    Ok(MafModel { sphering, rotation, eigenvalues, lag, tolerance, pairs, matrix })
}

fn check<T: Real>(model: &MafModel<T>, x: ArrayView2<T>) -> Result<()> {
    if x.ncols() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), found: x.ncols() });
    }
    Ok(())
}

/// Factors → MAF factors (`Y·M`).
pub fn maf_apply<T: Real>(model: &MafModel<T>, factors: ArrayView2<T>) -> Result<Array2<T>> {
    check(model, factors)?;
    Ok(factors.dot(&model.matrix))
}

/// MAF factors → factors by the transposed matrix (`Y_maf·Mᵀ`); exact when
/// the training factors had identity covariance.
pub fn maf_invert<T: Real>(model: &MafModel<T>, mafs: ArrayView2<T>) -> Result<Array2<T>> {
    check(model, mafs)?;
    Ok(mafs.dot(&model.matrix.t()))
}

/// Relative deviation from diagonality `τ(h)` and diagonalization efficiency
/// `κ(h)` per lag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DecorrelationMetrics<T: Real> {
    pub lags: Vec<T>,
    pub tau: Vec<Option<T>>,
    pub kappa: Vec<Option<T>>,
    pub tau_mean: Option<T>,
    pub kappa_mean: Option<T>,
}

impl<T: Real> DecorrelationMetrics<T> {
    /// Means of τ and κ over defined lags not exceeding `max_lag`.
    pub fn means_up_to(&self, max_lag: T) -> (Option<T>, Option<T>) {
        let mean = |v: &[Option<T>]| {
            let vals: Vec<T> =
                v.iter().zip(&self.lags).filter(|(_, &h)| h <= max_lag).filter_map(|(x, _)| *x).collect();
            (!vals.is_empty()).then(|| vals.iter().copied().sum::<T>() / T::of_usize(vals.len()))
        };
        (mean(&self.tau), mean(&self.kappa))
    }
}

/// τ and κ comparing factor variograms with the original-variable variograms
/// on the same lag grid.
pub fn decorrelation_metrics<T: Real>(
    factors: &VariogramSet<T>,
    sample: &VariogramSet<T>,
) -> Result<DecorrelationMetrics<T>> {
    if factors.lags != sample.lags {
        return Err(Error::Metric("factor and sample variograms use different lags".into()));
    }
    if factors.dim() != sample.dim() {
        return Err(Error::DimensionMismatch { expected: sample.dim(), found: factors.dim() });
    }
    let d = factors.dim();
    let mut tau = Vec::with_capacity(factors.len());
    let mut kappa = Vec::with_capacity(factors.len());
    for k in 0..factors.len() {
        if !factors.is_defined(k) {
            tau.push(None);
            kappa.push(None);
            continue;
        }
        let gf = &factors.gamma[k];
        let (mut off_abs, mut diag, mut off_sq) = (T::zero(), T::zero(), T::zero());
        for i in 0..d {
            diag += gf[[i, i]];
            for j in 0..d {
                if i != j {
                    off_abs += gf[[i, j]].abs();
                    off_sq += gf[[i, j]] * gf[[i, j]];
                }
            }
        }
        tau.push((diag > T::zero()).then(|| off_abs / diag));
        let sample_sq = if sample.is_defined(k) {
            let gz = &sample.gamma[k];
            (0..d)
                .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| gz[[i, j]] * gz[[i, j]])
                .sum::<T>()
        } else {
            T::zero()
        };
        kappa.push((sample_sq > T::zero()).then(|| T::one() - off_sq / sample_sq));
    }
    let mean = |v: &[Option<T>]| {
        let vals: Vec<T> = v.iter().filter_map(|x| *x).collect();
        (!vals.is_empty()).then(|| vals.iter().copied().sum::<T>() / T::of_usize(vals.len()))
    };
    Ok(DecorrelationMetrics { lags: factors.lags.clone(), tau_mean: mean(&tau), kappa_mean: mean(&kappa), tau, kappa })
}
