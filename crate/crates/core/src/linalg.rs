//! Small dense linear algebra on `ndarray` matrices.
//!
//! Dimensions here are the number of variables (a handful) or a kriging
//! neighbourhood (tens), so plain Jacobi and Cholesky are sufficient.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Weighted column means of an n×d matrix.
pub fn weighted_mean<T: Real>(data: ArrayView2<T>, weights: ArrayView1<T>) -> Array1<T> {
    let total: T = weights.sum();
    let mut mean = Array1::zeros(data.ncols());
    for (row, &w) in data.outer_iter().zip(weights.iter()) {
        mean.scaled_add(w, &row);
    }
    mean / total
}

/// Weighted mean vector and covariance (divisor = total weight).
pub fn weighted_covariance<T: Real>(data: ArrayView2<T>, weights: ArrayView1<T>) -> (Array1<T>, Array2<T>) {
    let d = data.ncols();
    let mean = weighted_mean(data, weights);
    let total: T = weights.sum();
    let mut cov = Array2::<T>::zeros((d, d));
    for (row, &w) in data.outer_iter().zip(weights.iter()) {
        for i in 0..d {
            let di = row[i] - mean[i];
            for j in i..d {
                cov[[i, j]] += w * di * (row[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov[[i, j]] / total;
            cov[[i, j]] = v;
            cov[[j, i]] = v;
        }
    }
    (mean, cov)
}

/// Unweighted mean and covariance (divisor n).
pub fn covariance<T: Real>(data: ArrayView2<T>) -> (Array1<T>, Array2<T>) {
    let w = Array1::from_elem(data.nrows(), T::one());
    weighted_covariance(data, w.view())
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching eigenvectors as
/// columns.
pub fn sym_eigen<T: Real>(a: &Array2<T>) -> (Array1<T>, Array2<T>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "sym_eigen needs a square matrix");
    let mut m = a.clone();
    let mut v = Array2::<T>::eye(n);
    let two = T::lit(2.0);
    for _sweep in 0..100 {
        let mut off = T::zero();
        let mut diag = T::zero();
        for i in 0..n {
            diag += m[[i, i]] * m[[i, i]];
            for j in (i + 1)..n {
                off += m[[i, j]] * m[[i, j]];
            }
        }
        if off <= T::epsilon() * T::epsilon() * diag || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[i, i]].partial_cmp(&m[[j, j]]).unwrap_or(std::cmp::Ordering::Equal));
    let values = Array1::from_iter(order.iter().map(|&i| m[[i, i]]));
    let mut vectors = Array2::<T>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        vectors.column_mut(dst).assign(&v.column(src));
    }
    (values, vectors)
}

/// Flips `v` so that its largest-magnitude component is positive.
pub fn canonical_sign<T: Real>(mut v: ndarray::ArrayViewMut1<T>) {
    let mut best = T::zero();
    let mut sign = T::one();
    for &x in v.iter() {
        if x.abs() > best {
            best = x.abs();
            sign = x.signum();
        }
    }
    if sign < T::zero() {
        v.mapv_inplace(|x| -x);
    }
}

/// `Q f(Λ) Qᵀ` for a symmetric matrix; fails if any eigenvalue is not
/// positive relative to the largest.
pub fn sym_matrix_function<T: Real>(a: &Array2<T>, f: impl Fn(T) -> T) -> Result<Array2<T>> {
    let (vals, vecs) = sym_eigen(a);
    let max = vals.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
    let floor = max * T::lit(1e-12);
    if vals.iter().any(|&x| x <= floor) || max == T::zero() {
        return Err(Error::Degenerate("covariance matrix is not positive definite".into()));
    }
    let n = a.nrows();
    let mut out = Array2::<T>::zeros((n, n));
    for k in 0..n {
        let fk = f(vals[k]);
        for i in 0..n {
            for j in 0..n {
                out[[i, j]] += vecs[[i, k]] * fk * vecs[[j, k]];
            }
        }
    }
    Ok(out)
}

/// Symmetric inverse square root `S^{-1/2} = Q Λ^{-1/2} Qᵀ`.
pub fn inv_sqrt_sym<T: Real>(a: &Array2<T>) -> Result<Array2<T>> {
    sym_matrix_function(a, |x| T::one() / x.sqrt())
}

/// Symmetric square root `S^{1/2}`.
pub fn sqrt_sym<T: Real>(a: &Array2<T>) -> Result<Array2<T>> {
    sym_matrix_function(a, |x| x.sqrt())
}

/// Symmetric orthogonalization `(W Wᵀ)^{-1/2} W`.
pub fn symmetric_orthogonalize<T: Real>(w: &Array2<T>) -> Result<Array2<T>> {
    let wwt = w.dot(&w.t());
    Ok(inv_sqrt_sym(&wwt)?.dot(w))
}

/// Largest absolute entry of `R Rᵀ − I`.
pub fn orthonormality_error<T: Real>(r: ArrayView2<T>) -> T {
    let p = r.dot(&r.t());
    let mut err = T::zero();
    for ((i, j), &x) in p.indexed_iter() {
        let target = if i == j { T::one() } else { T::zero() };
        err = err.max((x - target).abs());
    }
    err
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant<T: Real>(a: ArrayView2<T>) -> T {
    let n = a.nrows();
    let mut m = a.to_owned();
    let mut det = T::one();
    for c in 0..n {
        let mut piv = c;
        for r in (c + 1)..n {
            if m[[r, c]].abs() > m[[piv, c]].abs() {
                piv = r;
            }
        }
        if m[[piv, c]] == T::zero() {
            return T::zero();
        }
        if piv != c {
            for k in 0..n {
                m.swap([c, k], [piv, k]);
            }
            det = -det;
        }
        det *= m[[c, c]];
        for r in (c + 1)..n {
            let f = m[[r, c]] / m[[c, c]];
            for k in c..n {
                let v = m[[c, k]];
                m[[r, k]] -= f * v;
            }
        }
    }
    det
}

/// Cholesky factor (lower triangular) of a symmetric positive definite matrix.
pub fn cholesky<T: Real>(a: &Array2<T>) -> Option<Array2<T>> {
    let n = a.nrows();
    let mut l = Array2::<T>::zeros((n, n));
    for j in 0..n {
        let mut s = a[[j, j]];
        for k in 0..j {
            s -= l[[j, k]] * l[[j, k]];
        }
        if !(s > T::zero()) {
            return None;
        }
        let ljj = s.sqrt();
        l[[j, j]] = ljj;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / ljj;
        }
    }
    Some(l)
}

/// Solves `L Lᵀ x = b` given the Cholesky factor `L`.
pub fn cholesky_solve<T: Real>(l: &Array2<T>, b: ArrayView1<T>) -> Array1<T> {
    let n = l.nrows();
    let mut y = Array1::<T>::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    let mut x = Array1::<T>::zeros(n);
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[[k, i]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    x
}

/// Solves a symmetric positive definite system, adding `1e-8` diagonal
/// jitter once if the plain factorization fails.
pub fn solve_spd<T: Real>(a: &Array2<T>, b: ArrayView1<T>) -> Result<Array1<T>> {
    if let Some(l) = cholesky(a) {
        return Ok(cholesky_solve(&l, b));
    }
    let mut jittered = a.clone();
    for i in 0..a.nrows() {
        jittered[[i, i]] += T::lit(1e-8);
    }
    cholesky(&jittered)
        .map(|l| cholesky_solve(&l, b))
        .ok_or_else(|| Error::Singular("matrix not positive definite after jitter".into()))
}

/// Row-wise matrix product `Y = X Mᵀ`, i.e. applies `M` to each row vector.
pub fn apply_rows<T: Real>(x: ArrayView2<T>, m: ArrayView2<T>) -> Array2<T> {
    x.dot(&m.t())
}

/// Pearson correlation matrix from a covariance matrix.
pub fn correlation_from_cov<T: Real>(cov: &Array2<T>) -> Array2<T> {
    let d = cov.nrows();
    let sd: Vec<T> = (0..d).map(|i| cov[[i, i]].sqrt()).collect();
    Array2::from_shape_fn((d, d), |(i, j)| {
        if i == j {
            T::one()
        } else {
            (cov[[i, j]] / (sd[i] * sd[j])).max(-T::one()).min(T::one())
        }
    })
}

/// Population standard deviation of each column.
pub fn column_std<T: Real>(data: ArrayView2<T>) -> Array1<T> {
    let n = T::of_usize(data.nrows());
    let mean = data.mean_axis(Axis(0)).expect("non-empty");
    Array1::from_iter(
        (0..data.ncols())
            .map(|j| (data.column(j).iter().map(|&x| (x - mean[j]) * (x - mean[j])).sum::<T>() / n).sqrt()),
    )
}
