//! Orthonormal rotations used by RBIG: principal components and symmetric
//! FastICA.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;

/// Rows are unit eigenvectors of the weighted covariance, ordered by
/// descending eigenvalue; each row's largest-magnitude component is positive.
pub fn pca_rotation<T: Real>(data: ArrayView2<T>, weights: Option<ArrayView1<T>>) -> Result<Array2<T>> {
    let (n, d) = data.dim();
    if n <= d {
        return Err(Error::InvalidInput(format!("PCA needs more rows ({n}) than columns ({d})")));
    }
    let ones;
    let w = match weights {
        Some(w) => w,
        None => {
            ones = Array1::from_elem(n, T::one());
            ones.view()
        }
    };
    let (_, cov) = linalg::weighted_covariance(data, w);
    let (vals, vecs) = linalg::sym_eigen(&cov);
    let largest = vals[d - 1];
    if !(largest > T::zero()) || vals[0] <= largest * T::lit(1e-12) {
        return Err(Error::Degenerate("covariance is rank deficient".into()));
    }
    let mut r = Array2::<T>::zeros((d, d));
    for k in 0..d {
        r.row_mut(k).assign(&vecs.column(d - 1 - k));
        linalg::canonical_sign(r.row_mut(k));
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcaParams {
    pub max_sweeps: usize,
    /// Convergence threshold on the largest row-angle change (radians).
    pub tol: f64,
}

impl Default for IcaParams {
    fn default() -> Self {
        Self { max_sweeps: 200, tol: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcaRotation<T: Real> {
    pub matrix: Array2<T>,
    /// True when FastICA did not converge and the PCA rotation was used.
    pub fell_back: bool,
    pub sweeps: usize,
}

/// Symmetric FastICA (log-cosh contrast, `tanh` nonlinearity) on whitened
/// data. Falls back to [`pca_rotation`] when it does not converge.
pub fn ica_rotation<T: Real>(
    data: ArrayView2<T>,
    weights: Option<ArrayView1<T>>,
    params: IcaParams,
) -> Result<IcaRotation<T>> {
    let d = data.ncols();
    if d == 1 {
        return Ok(IcaRotation { matrix: Array2::eye(1), fell_back: false, sweeps: 0 });
    }
    match fast_ica(data, weights, params) {
        Some((matrix, sweeps)) => Ok(IcaRotation { matrix, fell_back: false, sweeps }),
        None => Ok(IcaRotation { matrix: pca_rotation(data, weights)?, fell_back: true, sweeps: params.max_sweeps }),
    }
}

/// `tanh` accurate to a few ulp in absolute terms.
#[inline(always)]
fn tanh(u: f64) -> f64 {
    let e = crate::scalar::exp_neg_f64(2.0 * u.abs().min(350.0));
    ((1.0 - e) / (1.0 + e)).copysign(u)
}

fn fast_ica<T: Real>(
    data: ArrayView2<T>,
    weights: Option<ArrayView1<T>>,
    params: IcaParams,
) -> Option<(Array2<T>, usize)> {
    let (n, d) = data.dim();
    let w: Vec<f64> = match weights {
        Some(w) => w.iter().map(|x| x.as_f64()).collect(),
        None => vec![1.0; n],
    };
    let total: f64 = w.iter().sum();
    let xs: Vec<f64> = data.iter().map(|v| v.as_f64()).collect();
    let mut unmix = Array2::<f64>::eye(d);
    for sweep in 1..=params.max_sweeps {
        let mut next = Array2::<f64>::zeros((d, d));
        for k in 0..d {
            let wk = unmix.row(k).to_vec();
            let mut acc = vec![0.0; d];
            let mut gp_mean = 0.0;
            for (row, &wi) in xs.chunks_exact(d).zip(&w) {
                let u: f64 = row.iter().zip(&wk).map(|(a, b)| a * b).sum();
                let g = tanh(u);
                for (a, &xv) in acc.iter_mut().zip(row) {
                    *a += wi * xv * g;
                }
                gp_mean += wi * (1.0 - g * g);
            }
            gp_mean /= total;
            for j in 0..d {
                next[[k, j]] = acc[j] / total - gp_mean * wk[j];
            }
        }
        let next = linalg::symmetric_orthogonalize(&next).ok()?;
        if next.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let change = (0..d)
            .map(|k| {
                let dot = next.row(k).dot(&unmix.row(k)).abs().min(1.0);
                (1.0 - dot * dot).max(0.0).sqrt().asin()
            })
            .fold(0.0, f64::max);
        unmix = next;
        if change < params.tol {
            let mut out = unmix.mapv(T::lit);
            for k in 0..d {
                linalg::canonical_sign(out.row_mut(k));
            }
            return Some((out, sweep));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn gaussian(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = crate::rng::rng_from(seed);
        Array2::from_shape_fn((n, d), |_| rng.sample(StandardNormal))
    }

    #[test]
    fn axis_aligned_gives_identity() {
        let mut x = gaussian(2000, 2, 1);
        x.column_mut(0).mapv_inplace(|v| 3.0 * v);
        let r = pca_rotation(x.view(), None).unwrap();
        assert!((r[[0, 0]] - 1.0).abs() < 1e-3 && (r[[1, 1]] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn recovers_45_degree_rotation() {
        let base = gaussian(500, 2, 2);
        // Exact axis-aligned covariance: sphere then scale.
        let (_, cov) = linalg::covariance(base.view());
        let s = linalg::inv_sqrt_sym(&cov).unwrap();
        let mut white = base.dot(&s);
        white -= &white.mean_axis(ndarray::Axis(0)).unwrap();
        white.column_mut(0).mapv_inplace(|v| 3.0 * v);
        let c = std::f64::consts::FRAC_1_SQRT_2;
        let rot = ndarray::array![[c, -c], [c, c]];
        let x = white.dot(&rot.t());
        let r = pca_rotation(x.view(), None).unwrap();
        // First principal axis = rotated e1 = (c, c).
        assert!((r[[0, 0]] - c).abs() < 1e-6 && (r[[0, 1]] - c).abs() < 1e-6);
        assert!((r[[1, 0]].abs() - c).abs() < 1e-6 && (r[[1, 1]].abs() - c).abs() < 1e-6);
    }

    #[test]
    fn five_dim_rotation_is_orthonormal() {
        let x = gaussian(400, 5, 3);
        let r = pca_rotation(x.view(), None).unwrap();
        assert!(linalg::orthonormality_error(r.view()) < 1e-10);
    }

    #[test]
    fn rank_deficient_rejected() {
        let mut x = gaussian(100, 2, 4);
        let c0 = x.column(0).to_owned();
        x.column_mut(1).assign(&c0);
        assert!(matches!(pca_rotation(x.view(), None), Err(Error::Degenerate(_))));
    }

    #[test]
    fn ica_unmixes_uniform_sources() {
        let mut rng = crate::rng::rng_from(5);
        let n = 5000;
        let s = Array2::from_shape_fn((n, 2), |_| (rng.random::<f64>() - 0.5) * 12f64.sqrt());
        let angle = 0.6f64;
        let mix = ndarray::array![[angle.cos(), -angle.sin()], [angle.sin(), angle.cos()]];
        let x = s.dot(&mix.t());
        let res = ica_rotation(x.view(), None, IcaParams::default()).unwrap();
        assert!(!res.fell_back);
        // Each recovered row must align with a row of the true unmixing matrix mixᵀ.
        let unmix = mix.t().to_owned();
        for k in 0..2 {
            let best = (0..2)
                .map(|j| res.matrix.row(k).dot(&unmix.row(j)).abs().min(1.0).acos())
                .fold(f64::INFINITY, f64::min);
            assert!(best.to_degrees() < 2.0, "angle error {}", best.to_degrees());
        }
    }

    #[test]
    fn ica_on_gaussian_stays_orthonormal() {
        let x = gaussian(1000, 3, 6);
        let res = ica_rotation(x.view(), None, IcaParams { max_sweeps: 50, tol: 1e-6 }).unwrap();
        assert!(linalg::orthonormality_error(res.matrix.view()) < 1e-10);
    }

    #[test]
    fn ica_one_dimensional() {
        let x = gaussian(50, 1, 7);
        let res = ica_rotation(x.view(), None, IcaParams::default()).unwrap();
        assert_eq!(res.matrix[[0, 0]].abs(), 1.0);
    }
}
