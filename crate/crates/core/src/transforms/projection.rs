//! Friedman's Legendre projection index and the seeded direction search used
//! by projection pursuit.

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;
use crate::scalar::{phi, Real};

pub const DEFAULT_INDEX_ORDER: usize = 8;
pub const DEFAULT_RESTARTS: usize = 100;
const MIN_LEN: usize = 20;

/// Legendre projection index of a univariate sample (`order` terms).
pub fn projection_index<T: Real>(p: &[T], order: usize) -> Result<T> {
    if p.len() < MIN_LEN {
        return Err(Error::InvalidInput(format!("projection index needs at least {MIN_LEN} values")));
    }
    let v: Vec<f64> = p.iter().map(|x| x.as_f64()).collect();
    index_f64(&v, order).map(T::lit).ok_or_else(|| Error::Degenerate("constant projection".into()))
}

/// `None` for a constant sample.
pub(crate) fn index_f64(p: &[f64], order: usize) -> Option<f64> {
    let n = p.len() as f64;
    let mean = p.iter().sum::<f64>() / n;
    let var = p.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    if !(var > 0.0) || var <= 1e-300 {
        return None;
    }
    let sd = var.sqrt();
    let mut sums = vec![0.0; order + 1];
    for &x in p {
        let r = 2.0 * phi((x - mean) / sd) - 1.0;
        let (mut l0, mut l1) = (1.0, r);
        if order >= 1 {
            sums[1] += l1;
        }
        for j in 2..=order {
            let jf = j as f64;
            let l2 = ((2.0 * jf - 1.0) * r * l1 - (jf - 1.0) * l0) / jf;
            sums[j] += l2;
            l0 = l1;
            l1 = l2;
        }
    }
    Some(
        (1..=order)
            .map(|j| {
                let m = sums[j] / n;
                (2.0 * j as f64 + 1.0) / 2.0 * m * m
            })
            .sum(),
    )
}

/// Settings for [`find_max_index_direction`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchParams {
    pub restarts: usize,
    pub order: usize,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_evals: usize,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            restarts: DEFAULT_RESTARTS,
            order: DEFAULT_INDEX_ORDER,
            initial_step: 0.1,
            min_step: 1e-4,
            max_evals: 500,
        }
    }
}

/// Direction of maximum projection index on sphered data: quasi-random
/// starting directions, then a compass search in the tangent plane of the
/// best one. The returned direction has a positive largest component.
pub fn find_max_index_direction<T: Real>(
    data: ArrayView2<T>,
    seed: u64,
    params: SearchParams,
) -> Result<(Array1<T>, T)> {
    let (n, d) = data.dim();
    if d < 2 {
        return Err(Error::InvalidInput("direction search needs d >= 2".into()));
    }
    if n < MIN_LEN {
        return Err(Error::InvalidInput(format!("direction search needs at least {MIN_LEN} rows")));
    }
    let x: Array2<f64> = data.mapv(|v| v.as_f64());
    let mut proj = vec![0.0; n];
    let mut evals = 0usize;
    let mut eval = |theta: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        for (p, row) in proj.iter_mut().zip(x.outer_iter()) {
            *p = row.iter().zip(theta).map(|(a, b)| a * b).sum();
        }
        index_f64(&proj, params.order).unwrap_or(0.0)
    };

    let mut best = vec![0.0; d];
    let mut best_val = f64::NEG_INFINITY;
    for dir in starting_directions(d, params.restarts.max(1), seed) {
        let v = eval(&dir, &mut evals);
        if v > best_val {
            best_val = v;
            best = dir;
        }
    }

    let mut step = params.initial_step;
    while step >= params.min_step && evals < params.max_evals {
        let mut improved = false;
        for t in tangent_basis(&best) {
            for sign in [1.0, -1.0] {
                let mut cand: Vec<f64> = best.iter().zip(&t).map(|(b, u)| b + sign * step * u).collect();
                normalize(&mut cand);
                let v = eval(&cand, &mut evals);
                if v > best_val {
                    best_val = v;
                    best = cand;
                    improved = true;
                    break;
                }
            }
            if improved {
                break;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }

    let mut theta = Array1::from_iter(best.into_iter().map(T::lit));
    linalg::canonical_sign(theta.view_mut());
    let norm = theta.iter().map(|&v| v * v).sum::<T>().sqrt();
    theta.mapv_inplace(|v| v / norm);
    Ok((theta, T::lit(best_val.max(0.0))))
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in v.iter_mut() {
        *x /= norm;
    }
}

/// Orthonormal basis of the plane orthogonal to `theta` (Gram-Schmidt on the
/// coordinate axes).
fn tangent_basis(theta: &[f64]) -> Vec<Vec<f64>> {
    let d = theta.len();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d - 1);
    for k in 0..d {
        let mut e = vec![0.0; d];
        e[k] = 1.0;
        for b in std::iter::once(theta).chain(basis.iter().map(|v| v.as_slice())) {
            let dot: f64 = e.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in e.iter_mut().zip(b) {
                *x -= dot * y;
            }
        }
        let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            e.iter_mut().for_each(|x| *x /= norm);
            basis.push(e);
        }
        if basis.len() == d - 1 {
            break;
        }
    }
    basis
}

/// Randomly shifted Kronecker (R_d) sequence pushed through the normal
/// quantile and projected on the sphere.
fn starting_directions(d: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut g = 2.0f64;
    for _ in 0..64 {
        g = (1.0 + g).powf(1.0 / (d as f64 + 1.0));
    }
    let alpha: Vec<f64> = (1..=d).map(|k| (1.0 / g.powi(k as i32)).fract()).collect();
    let mut rng = rng::rng_from(seed);
    let shift: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
    (1..=count)
        .map(|i| {
            let mut v: Vec<f64> = (0..d)
                .map(|k| {
                    let u = (shift[k] + i as f64 * alpha[k]).fract().clamp(1e-9, 1.0 - 1e-9);
                    crate::scalar::norm_quantile(u)
                })
                .collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-12 {
                v = vec![0.0; d];
                v[i % d] = 1.0;
            } else {
                v.iter_mut().for_each(|x| *x /= norm);
            }
            v
        })
        .collect()
}
