//! Classical experimental direct and cross variograms.

use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Pair selection by orientation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Direction {
    Omni,
    /// Pairs within `tolerance_deg` of the horizontal plane.
    Horizontal {
        tolerance_deg: f64,
    },
    /// Pairs within `tolerance_deg` of the vertical axis.
    Vertical {
        tolerance_deg: f64,
    },
}

impl Direction {
    fn accepts(&self, dz: f64, dist: f64) -> bool {
        match *self {
            Direction::Omni => true,
            Direction::Horizontal { tolerance_deg } => dz.abs() <= dist * tolerance_deg.to_radians().sin(),
            Direction::Vertical { tolerance_deg } => dz.abs() >= dist * tolerance_deg.to_radians().cos(),
        }
    }
}

/// Lag classes `k·width ± tolerance` for `k = 1..=count`. A pair belongs to
/// the nearest class centre when classes overlap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagSpec {
    pub width: f64,
    pub count: usize,
    /// Half-width of each class; defaults to `width / 2`.
    pub tolerance: Option<f64>,
}

impl LagSpec {
    pub fn new(width: f64, count: usize) -> Self {
        Self { width, count, tolerance: None }
    }

    pub fn half_width(&self) -> f64 {
        self.tolerance.unwrap_or(self.width / 2.0)
    }

    fn validate(&self) -> Result<()> {
        if !(self.width > 0.0) || self.count == 0 || !(self.half_width() > 0.0) {
            return Err(Error::InvalidInput("lag width, count and tolerance must be positive".into()));
        }
        Ok(())
    }

    /// Class index of a separation distance, if any.
    #[inline]
    pub(crate) fn class_of(&self, dist: f64) -> Option<usize> {
        let k = (dist / self.width).round().clamp(1.0, self.count as f64);
        let off = dist - k * self.width;
        let tol = self.half_width();
        (off >= -tol && off < tol).then(|| k as usize - 1)
    }
}

/// Direct (diagonal) and cross (off-diagonal) variograms per lag class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct VariogramSet<T: Real> {
    pub lags: Vec<T>,
    pub direction: Direction,
    pub counts: Vec<u64>,
    /// One symmetric d×d matrix per lag; zero where `counts` is zero.
    pub gamma: Vec<Array2<T>>,
}

impl<T: Real> VariogramSet<T> {
    pub fn dim(&self) -> usize {
        self.gamma.first().map_or(0, |g| g.nrows())
    }

    pub fn len(&self) -> usize {
        self.lags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lags.is_empty()
    }

    pub fn is_defined(&self, k: usize) -> bool {
        self.counts[k] > 0
    }

    /// `(lag, gamma_ij)` over defined lags.
    pub fn series(&self, i: usize, j: usize) -> Vec<(T, T)> {
        (0..self.len()).filter(|&k| self.is_defined(k)).map(|k| (self.lags[k], self.gamma[k][[i, j]])).collect()
    }

    /// Delimited text: `lag,count,g_0_0,g_0_1,...` (upper triangle).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        let d = self.dim();
        let mut header = vec!["lag".to_string(), "count".to_string()];
        for i in 0..d {
            for j in i..d {
                header.push(format!("gamma_{i}_{j}"));
            }
        }
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.len() {
            let mut row = vec![self.lags[k].to_string(), self.counts[k].to_string()];
            for i in 0..d {
                for j in i..d {
                    row.push(if self.is_defined(k) { self.gamma[k][[i, j]].to_string() } else { String::new() });
                }
            }
            writeln!(w, "{}", row.join(","))?;
        }
        w.flush()?;
        Ok(())
    }
}

type Partial = (Vec<u64>, Vec<Vec<f64>>);

/// Classical estimator over all pairs of `coords` (n×3) and `values` (n×d).
pub fn experimental_variograms<T: Real>(
    coords: ArrayView2<T>,
    values: ArrayView2<T>,
    lags: &LagSpec,
    direction: Direction,
) -> Result<VariogramSet<T>> {
    lags.validate()?;
    let (n, d) = values.dim();
    if coords.nrows() != n {
        return Err(Error::DimensionMismatch { expected: n, found: coords.nrows() });
    }
    if coords.ncols() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, found: coords.ncols() });
    }
    if n < 2 {
        return Err(Error::InvalidInput("variograms need at least two samples".into()));
    }
    let c: Vec<[f64; 3]> = coords.rows().into_iter().map(|r| [r[0].as_f64(), r[1].as_f64(), r[2].as_f64()]).collect();
    let v: Vec<f64> = values.iter().map(|x| x.as_f64()).collect();
    let nl = lags.count;
    let pairs = d * (d + 1) / 2;
    let max_dist = (nl as f64) * lags.width + lags.half_width();

    const CHUNK: usize = 64;
    let starts: Vec<usize> = (0..n).step_by(CHUNK).collect();
    let partials: Vec<Partial> = starts
        .par_iter()
        .map(|&s| {
            let mut counts = vec![0u64; nl];
            let mut sums = vec![vec![0.0; pairs]; nl];
            let mut diff = vec![0.0; d];
            for a in s..(s + CHUNK).min(n) {
                for b in (a + 1)..n {
                    let dx = c[b][0] - c[a][0];
                    let dy = c[b][1] - c[a][1];
                    let dz = c[b][2] - c[a][2];
                    let dist = (dx * dx + dy * dy + dz * dz).sqrt();
                    if dist > max_dist || !direction.accepts(dz, dist) {
                        continue;
                    }
                    let Some(k) = lags.class_of(dist) else { continue };
                    counts[k] += 1;
                    for (j, dj) in diff.iter_mut().enumerate() {
                        *dj = v[a * d + j] - v[b * d + j];
                    }
                    let mut p = 0;
                    for i in 0..d {
                        for j in i..d {
                            sums[k][p] += diff[i] * diff[j];
                            p += 1;
                        }
                    }
                }
            }
            (counts, sums)
        })
        .collect();
    Ok(reduce(partials, lags, direction, d))
}

fn reduce<T: Real>(partials: Vec<Partial>, lags: &LagSpec, direction: Direction, d: usize) -> VariogramSet<T> {
    let nl = lags.count;
    let pairs = d * (d + 1) / 2;
    let mut counts = vec![0u64; nl];
    let mut sums = vec![vec![0.0; pairs]; nl];
    for (c, s) in partials {
        for k in 0..nl {
            counts[k] += c[k];
            for p in 0..pairs {
                sums[k][p] += s[k][p];
            }
        }
    }
    let gamma = (0..nl)
        .map(|k| {
            let mut g = Array2::<T>::zeros((d, d));
            if counts[k] > 0 {
                let mut p = 0;
                for i in 0..d {
                    for j in i..d {
                        let val = T::lit(sums[k][p] / (2.0 * counts[k] as f64));
                        g[[i, j]] = val;
                        g[[j, i]] = val;
                        p += 1;
                    }
                }
            }
            g
        })
        .collect();
    VariogramSet { lags: (1..=nl).map(|k| T::lit(k as f64 * lags.width)).collect(), direction, counts, gamma }
}

/// Experimental variograms of values on a regular grid (`values` is
/// nodes×d, x fastest), enumerating node offsets instead of all pairs.
pub fn grid_variograms<T: Real>(
    counts: [usize; 3],
    cell: [f64; 3],
    values: ArrayView2<T>,
    lags: &LagSpec,
    direction: Direction,
) -> Result<VariogramSet<T>> {
    lags.validate()?;
    let [nx, ny, nz] = counts;
    let nodes = nx * ny * nz;
    let (m, d) = values.dim();
    if m != nodes {
        return Err(Error::DimensionMismatch { expected: nodes, found: m });
    }
    let max_dist = lags.count as f64 * lags.width + lags.half_width();
    let reach = |c: f64, n: usize| ((max_dist / c).floor() as usize).min(n.saturating_sub(1)) as isize;
    let (rx, ry, rz) = (reach(cell[0], nx), reach(cell[1], ny), reach(cell[2], nz));
    // Half-space of offsets so each unordered pair is counted once.
    let mut offsets = Vec::new();
    for oz in 0..=rz {
        for oy in -ry..=ry {
            for ox in -rx..=rx {
                if oz == 0 && (oy < 0 || (oy == 0 && ox <= 0)) {
                    continue;
                }
                let (dx, dy, dz) = (ox as f64 * cell[0], oy as f64 * cell[1], oz as f64 * cell[2]);
                let dist = (dx * dx + dy * dy + dz * dz).sqrt();
                if dist > max_dist || !direction.accepts(dz, dist) {
                    continue;
                }
                if let Some(k) = lags.class_of(dist) {
                    offsets.push((ox, oy, oz, k));
                }
            }
        }
    }
    let v: Vec<f64> = values.iter().map(|x| x.as_f64()).collect();
    let pairs = d * (d + 1) / 2;
    let nl = lags.count;
    let partials: Vec<Partial> = offsets
        .par_chunks(16)
        .map(|chunk| {
            let mut cnt = vec![0u64; nl];
            let mut sums = vec![vec![0.0; pairs]; nl];
            let mut diff = vec![0.0; d];
            for &(ox, oy, oz, k) in chunk {
                let xr = (0.max(-ox) as usize)..((nx as isize - ox.max(0)) as usize);
                let yr = (0.max(-oy) as usize)..((ny as isize - oy.max(0)) as usize);
                for z in 0..(nz - oz as usize) {
                    for y in yr.clone() {
                        for x in xr.clone() {
                            let a = x + nx * (y + ny * z);
                            let b =
                                (x as isize + ox) as usize + nx * ((y as isize + oy) as usize + ny * (z + oz as usize));
                            for (j, dj) in diff.iter_mut().enumerate() {
                                *dj = v[a * d + j] - v[b * d + j];
                            }
                            let mut p = 0;
                            for i in 0..d {
                                for j in i..d {
                                    sums[k][p] += diff[i] * diff[j];
                                    p += 1;
                                }
                            }
                            cnt[k] += 1;
                        }
                    }
                }
            }
            (cnt, sums)
        })
        .collect();
    Ok(reduce(partials, lags, direction, d))
}

/// Symmetrized variogram matrix of `values` at a single lag class
/// `[lag − tol, lag + tol)`, omnidirectional. Returns the matrix and pair count.
pub(crate) fn variogram_matrix_at<T: Real>(
    coords: ArrayView2<T>,
    values: ArrayView2<T>,
    lag: f64,
    tol: f64,
) -> Result<(Array2<T>, u64)> {
    let spec = LagSpec { width: lag, count: 1, tolerance: Some(tol) };
    let set = experimental_variograms(coords, values, &spec, Direction::Omni)?;
    Ok((set.gamma[0].clone(), set.counts[0]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn hand_pair() {
        let coords: Array2<f64> = array![[0.0, 0.0, 0.0], [10.0, 0.0, 0.0]];
        let values: Array2<f64> = array![[0.0], [2.0]];
        let set =
            experimental_variograms(coords.view(), values.view(), &LagSpec::new(10.0, 2), Direction::Omni).unwrap();
        assert_eq!(set.counts, vec![1, 0]);
        assert_eq!(set.gamma[0][[0, 0]], 2.0);
        assert!(!set.is_defined(1));
    }

    #[test]
    fn constant_field_is_zero() {
        let coords = Array2::from_shape_fn((30, 3), |(i, j)| if j == 0 { i as f64 } else { 0.0 });
        let values = Array2::from_elem((30, 2), 3.5);
        let set =
            experimental_variograms(coords.view(), values.view(), &LagSpec::new(1.0, 5), Direction::Omni).unwrap();
        assert!(set.gamma.iter().all(|g| g.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn white_noise_sill() {
        let mut rng = crate::rng::rng_from(3);
        let n = 5000;
        let coords = Array2::from_shape_fn((n, 3), |(_, j)| if j < 2 { rng.random::<f64>() * 100.0 } else { 0.0 });
        let values = Array2::from_shape_fn((n, 1), |_| rng.sample::<f64, _>(StandardNormal));
        let set =
            experimental_variograms(coords.view(), values.view(), &LagSpec::new(5.0, 10), Direction::Omni).unwrap();
        for g in &set.gamma {
            assert!((g[[0, 0]] - 1.0).abs() < 0.1);
        }
    }

    #[test]
    fn shift_and_scale_behaviour() {
        let mut rng = crate::rng::rng_from(4);
        let coords = Array2::from_shape_fn((200, 3), |_| rng.random::<f64>() * 50.0);
        let values = Array2::from_shape_fn((200, 2), |_| rng.random::<f64>());
        let spec = LagSpec::new(5.0, 6);
        let a = experimental_variograms(coords.view(), values.view(), &spec, Direction::Omni).unwrap();
        let shifted = values.mapv(|v| 3.0 * v + 7.0);
        let b = experimental_variograms(coords.view(), shifted.view(), &spec, Direction::Omni).unwrap();
        for (ga, gb) in a.gamma.iter().zip(&b.gamma) {
            for (x, y) in ga.iter().zip(gb) {
                assert!((9.0 * x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn directional_split() {
        let coords: Array2<f64> = array![[0.0, 0.0, 0.0], [10.0, 0.0, 0.0], [0.0, 0.0, 10.0]];
        let values: Array2<f64> = array![[0.0], [1.0], [3.0]];
        let spec = LagSpec::new(10.0, 1);
        let h =
            experimental_variograms(coords.view(), values.view(), &spec, Direction::Horizontal { tolerance_deg: 22.5 })
                .unwrap();
        let v =
            experimental_variograms(coords.view(), values.view(), &spec, Direction::Vertical { tolerance_deg: 22.5 })
                .unwrap();
        assert_eq!((h.counts[0], v.counts[0]), (1, 1));
        assert_eq!(h.gamma[0][[0, 0]], 0.5);
        assert_eq!(v.gamma[0][[0, 0]], 4.5);
    }

    #[test]
    fn grid_matches_pairwise() {
        let mut rng = crate::rng::rng_from(5);
        let (nx, ny, nz) = (9, 7, 2);
        let cell = [2.0, 3.0, 1.5];
        let values = Array2::from_shape_fn((nx * ny * nz, 2), |_| rng.random::<f64>());
        let coords = Array2::from_shape_fn((nx * ny * nz, 3), |(i, j)| {
            let (x, y, z) = (i % nx, (i / nx) % ny, i / (nx * ny));
            [x as f64 * cell[0], y as f64 * cell[1], z as f64 * cell[2]][j]
        });
        for dir in [Direction::Omni, Direction::Horizontal { tolerance_deg: 10.0 }] {
            let spec = LagSpec::new(2.5, 6);
            let a = experimental_variograms(coords.view(), values.view(), &spec, dir).unwrap();
            let b = grid_variograms([nx, ny, nz], cell, values.view(), &spec, dir).unwrap();
            assert_eq!(a.counts, b.counts);
            for (ga, gb) in a.gamma.iter().zip(&b.gamma) {
                for (x, y) in ga.iter().zip(gb) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }
}
