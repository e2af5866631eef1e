//! Octant neighbourhood search and zero-mean simple kriging.

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;
use crate::spatial::VariogramModel;

/// Moving search ellipsoid split into angular sectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodSpec {
    pub radii: [f64; 3],
    /// 1, 4 (quadrants in x-y) or 8.
    pub octants: usize,
    pub max_per_octant: usize,
}

impl Default for NeighborhoodSpec {
    fn default() -> Self {
        Self { radii: [1000.0; 3], octants: 8, max_per_octant: 8 }
    }
}

impl NeighborhoodSpec {
    pub fn validate(&self) -> Result<()> {
        if self.radii.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::InvalidInput("search radii must be positive".into()));
        }
        if ![1, 4, 8].contains(&self.octants) {
            return Err(Error::InvalidInput(format!("octants must be 1, 4 or 8, got {}", self.octants)));
        }
        if self.max_per_octant == 0 {
            return Err(Error::InvalidInput("max per octant must be at least 1".into()));
        }
        Ok(())
    }

    /// Sector of offset `d` (sample minus target): bit `a` is set when
    /// `d[a] ≥ 0`, so boundary points fall on the nonnegative side.
    pub fn sector(&self, d: [f64; 3]) -> usize {
        let bits = (d[0] >= 0.0) as usize | ((d[1] >= 0.0) as usize) << 1 | ((d[2] >= 0.0) as usize) << 2;
        match self.octants {
            1 => 0,
            4 => bits & 3,
            _ => bits,
        }
    }
}

pub(crate) fn points_of<T: Real>(coords: ArrayView2<T>) -> Vec<[f64; 3]> {
    coords.rows().into_iter().map(|r| [r[0].as_f64(), r[1].as_f64(), r[2].as_f64()]).collect()
}

/// Reusable search over a fixed point set.
pub(crate) struct Searcher<'a> {
    points: &'a [[f64; 3]],
    spec: NeighborhoodSpec,
    buckets: Vec<Vec<(f64, usize)>>,
}

impl<'a> Searcher<'a> {
    pub(crate) fn new(points: &'a [[f64; 3]], spec: NeighborhoodSpec) -> Self {
        Self { points, spec, buckets: vec![Vec::new(); spec.octants] }
    }

    /// Indices selected around `target`, ordered by (distance, index).
    pub(crate) fn search(&mut self, target: [f64; 3]) -> Vec<usize> {
        let r = self.spec.radii;
        self.buckets.iter_mut().for_each(Vec::clear);
        for (i, p) in self.points.iter().enumerate() {
            let d = [p[0] - target[0], p[1] - target[1], p[2] - target[2]];
            let e = (d[0] / r[0]).powi(2) + (d[1] / r[1]).powi(2) + (d[2] / r[2]).powi(2);
            if e <= 1.0 {
                let dist2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
                self.buckets[self.spec.sector(d)].push((dist2, i));
            }
        }
        let mut out: Vec<(f64, usize)> = Vec::new();
        for b in &mut self.buckets {
            b.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            out.extend(b.iter().take(self.spec.max_per_octant));
        }
        out.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        out.into_iter().map(|(_, i)| i).collect()
    }
}

/// Samples (rows of `coords`, n×3) selected around `target`.
pub fn neighborhood_search<T: Real>(
    coords: ArrayView2<T>,
    target: [f64; 3],
    spec: &NeighborhoodSpec,
) -> Result<Vec<usize>> {
    spec.validate()?;
    if coords.ncols() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, found: coords.ncols() });
    }
    let pts = points_of(coords);
    Ok(Searcher::new(&pts, *spec).search(target))
}

fn cov<T: Real>(model: &VariogramModel<T>, a: [f64; 3], b: [f64; 3]) -> f64 {
    let h = [T::lit(a[0] - b[0]), T::lit(a[1] - b[1]), T::lit(a[2] - b[2])];
    model.covariance(h).as_f64()
}

/// Simple kriging weights for `target` from neighbours at `points`.
pub fn kriging_weights<T: Real>(model: &VariogramModel<T>, points: &[[f64; 3]], target: [f64; 3]) -> Result<Vec<f64>> {
    let n = points.len();
    if n == 0 {
        return Err(Error::InvalidInput("kriging needs at least one neighbour".into()));
    }
    let a = Array2::from_shape_fn((n, n), |(i, j)| cov(model, points[i], points[j]));
    let b = Array1::from_iter(points.iter().map(|&p| cov(model, p, target)));
    Ok(linalg::solve_spd(&a, b.view())?.to_vec())
}

/// Zero-mean simple kriging estimate at `target` and its weights.
pub fn simple_krige<T: Real>(
    model: &VariogramModel<T>,
    points: &[[f64; 3]],
    values: &[T],
    target: [f64; 3],
) -> Result<(T, Vec<T>)> {
    if values.len() != points.len() {
        return Err(Error::DimensionMismatch { expected: points.len(), found: values.len() });
    }
    let w = kriging_weights(model, points, target)?;
    let est = w.iter().zip(values).map(|(w, v)| w * v.as_f64()).sum::<f64>();
    Ok((T::lit(est), w.into_iter().map(T::lit).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> VariogramModel<f64> {
        VariogramModel::isotropic(0.1, &[(0.9, 10.0)]).unwrap()
    }

    #[test]
    fn exact_at_datum() {
        let pts = [[0.0, 0.0, 0.0], [3.0, 1.0, 0.0], [-2.0, 4.0, 0.0]];
        let vals = [0.7, -1.2, 0.3];
        for (p, v) in pts.iter().zip(vals) {
            let (est, _) = simple_krige(&model(), &pts, &vals, *p).unwrap();
            assert!((est - v).abs() < 1e-8);
        }
    }

    #[test]
    fn far_field_is_mean() {
        let pts = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]];
        let (est, w) = simple_krige(&model(), &pts, &[2.0, 1.0], [100.0, 0.0, 0.0]).unwrap();
        assert_eq!(est, 0.0);
        assert!(w.iter().all(|w| *w == 0.0));
    }

    #[test]
    fn symmetric_neighbours_share_weight() {
        let pts = [[-2.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        let (_, w) = simple_krige(&model(), &pts, &[1.0, 1.0], [0.0, 0.0, 0.0]).unwrap();
        assert!((w[0] - w[1]).abs() < 1e-14 && w[0] > 0.0);
    }

    #[test]
    fn duplicate_points_use_jitter() {
        let m = VariogramModel::isotropic(0.0, &[(1.0, 10.0)]).unwrap();
        let pts = [[0.0; 3], [0.0; 3]];
        let (est, _) = simple_krige(&m, &pts, &[1.0, 1.0], [1.0, 0.0, 0.0]).unwrap();
        assert!(est > 0.5 && est < 1.0);
    }

    #[test]
    fn single_sample_selected() {
        let c = Array2::from_shape_vec((1, 3), vec![1.0, 1.0, 0.0]).unwrap();
        let s = neighborhood_search(c.view(), [0.0; 3], &NeighborhoodSpec::default()).unwrap();
        assert_eq!(s, vec![0]);
        let tight = NeighborhoodSpec { radii: [0.5; 3], ..Default::default() };
        assert!(neighborhood_search(c.view(), [0.0; 3], &tight).unwrap().is_empty());
    }

    #[test]
    fn octant_truncation_keeps_nearest() {
        let c = Array2::from_shape_fn((20, 3), |(i, j)| if j == 2 { 1.0 } else { 1.0 + (19 - i) as f64 });
        let s = neighborhood_search(c.view(), [0.0; 3], &NeighborhoodSpec::default()).unwrap();
        assert_eq!(s, (12..20).rev().collect::<Vec<_>>());
    }

    #[test]
    fn boundary_rule_and_ties() {
        let spec = NeighborhoodSpec { max_per_octant: 1, ..Default::default() };
        assert_eq!(spec.sector([0.0, 0.0, 0.0]), 7);
        assert_eq!(spec.sector([-1.0, 0.0, 0.0]), 6);
        // Two samples at equal distance in the same octant: lower index wins.
        let c = Array2::from_shape_vec((2, 3), vec![1.0, 2.0, 0.0, 2.0, 1.0, 0.0]).unwrap();
        for _ in 0..3 {
            assert_eq!(neighborhood_search(c.view(), [0.0; 3], &spec).unwrap(), vec![0]);
        }
        let q = NeighborhoodSpec { octants: 4, ..Default::default() };
        assert_eq!(q.sector([1.0, -1.0, -5.0]), 1);
        assert!(NeighborhoodSpec { octants: 3, ..Default::default() }.validate().is_err());
    }
}
