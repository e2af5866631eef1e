//! Nested spherical variogram models and weighted least-squares fitting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::experimental::{Direction, VariogramSet};

/// Spherical structure with separate horizontal and vertical ranges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Spherical<T: Real> {
    pub sill: T,
    pub range_h: T,
    pub range_v: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct VariogramModel<T: Real> {
    pub nugget: T,
    pub structures: Vec<Spherical<T>>,
}

#[inline]
pub fn spherical<T: Real>(u: T) -> T {
    if u >= T::one() {
        T::one()
    } else {
        T::lit(1.5) * u - T::lit(0.5) * u * u * u
    }
}

impl<T: Real> VariogramModel<T> {
    pub fn new(nugget: T, structures: Vec<Spherical<T>>) -> Result<Self> {
        let m = Self { nugget, structures };
        m.validate()?;
        Ok(m)
    }

    /// Isotropic model `nugget + Σ sill·Sph(range)`.
    pub fn isotropic(nugget: T, structures: &[(T, T)]) -> Result<Self> {
        Self::new(nugget, structures.iter().map(|&(sill, a)| Spherical { sill, range_h: a, range_v: a }).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nugget >= T::zero()) {
            return Err(Error::InvalidInput("nugget must be nonnegative".into()));
        }
        for s in &self.structures {
            if !(s.sill > T::zero()) || !(s.range_h > T::zero()) || !(s.range_v > T::zero()) {
                return Err(Error::InvalidInput("structure sills and ranges must be positive".into()));
            }
        }
        if !(self.total_sill() > T::zero()) {
            return Err(Error::InvalidInput("total sill must be positive".into()));
        }
        Ok(())
    }

    pub fn total_sill(&self) -> T {
        self.nugget + self.structures.iter().map(|s| s.sill).sum::<T>()
    }

    pub fn max_range(&self) -> T {
        self.structures.iter().fold(T::zero(), |m, s| m.max(s.range_h).max(s.range_v))
    }

    /// γ at separation vector `h` (x, y horizontal; z vertical).
    pub fn gamma(&self, h: [T; 3]) -> T {
        let hh2 = h[0] * h[0] + h[1] * h[1];
        let hv2 = h[2] * h[2];
        if hh2 + hv2 == T::zero() {
            return T::zero();
        }
        let mut g = self.nugget;
        for s in &self.structures {
            let u = (hh2 / (s.range_h * s.range_h) + hv2 / (s.range_v * s.range_v)).sqrt();
            g += s.sill * spherical(u);
        }
        g
    }

    /// γ at scalar distance along a direction class (omni and horizontal use
    /// the horizontal range).
    pub fn gamma_along(&self, dist: T, direction: Direction) -> T {
        match direction {
            Direction::Vertical { .. } => self.gamma([T::zero(), T::zero(), dist]),
            _ => self.gamma([dist, T::zero(), T::zero()]),
        }
    }

    /// Covariance `C(h) = total sill − γ(h)`.
    pub fn covariance(&self, h: [T; 3]) -> T {
        self.total_sill() - self.gamma(h)
    }
}

/// γ of `model` at separation `h`.
pub fn model_gamma<T: Real>(model: &VariogramModel<T>, h: [T; 3]) -> T {
    model.gamma(h)
}

/// Structure of the model to fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitSpec {
    /// Number of spherical structures (0 to 2).
    pub structures: usize,
    pub nugget: bool,
    /// Constrain nugget + sills to this value.
    pub total_sill: Option<f64>,
    /// Points per range axis in the coarse search.
    pub grid: usize,
}

impl Default for FitSpec {
    fn default() -> Self {
        Self { structures: 2, nugget: true, total_sill: None, grid: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct VariogramFit<T: Real> {
    pub model: VariogramModel<T>,
    /// Weighted sum of squared residuals.
    pub objective: f64,
    /// Unweighted RMS residual over the fitted points.
    pub rmse: f64,
}

struct Point {
    h: f64,
    gamma: f64,
    weight: f64,
    vertical: bool,
}

/// Fits the direct variogram of variable `var` from one or more
/// experimental sets. Vertical sets constrain the vertical ranges; if none is
/// given the model is isotropic.
pub fn fit_variogram<T: Real>(sets: &[&VariogramSet<T>], var: usize, spec: &FitSpec) -> Result<VariogramFit<T>> {
    if spec.structures > 2 || (spec.structures == 0 && !spec.nugget) {
        return Err(Error::Fit("between 0 and 2 structures, with at least one component".into()));
    }
    let mut pts = Vec::new();
    for set in sets {
        if var >= set.dim() {
            return Err(Error::DimensionMismatch { expected: set.dim(), found: var + 1 });
        }
        let vertical = matches!(set.direction, Direction::Vertical { .. });
        for k in 0..set.len() {
            if set.is_defined(k) {
                let h = set.lags[k].as_f64();
                pts.push(Point {
                    h,
                    gamma: set.gamma[k][[var, var]].as_f64(),
                    weight: set.counts[k] as f64 / (h * h),
                    vertical,
                });
            }
        }
    }
    if pts.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 non-empty lags, found {}", pts.len())));
    }
    let anisotropic = pts.iter().any(|p| p.vertical) && pts.iter().any(|p| !p.vertical);
    let ns = spec.structures;
    let axes = if anisotropic { 2 * ns } else { ns };

    let h_of = |vertical: bool| pts.iter().filter(move |p| p.vertical == vertical).map(|p| p.h);
    let bounds = |vertical: bool| {
        let lo = h_of(vertical).fold(f64::INFINITY, f64::min);
        let hi = h_of(vertical).fold(0.0, f64::max);
        (lo * 0.5, hi * 2.0)
    };
    let (hlo, hhi) = bounds(false);
    let (vlo, vhi) = if anisotropic { bounds(true) } else { (hlo, hhi) };

    // Parameter vector: log ranges (horizontal per structure, then vertical).
    let ranges_of = |theta: &[f64]| -> Vec<(f64, f64)> {
        (0..ns)
            .map(|s| {
                let h = theta[s].exp();
                let v = if anisotropic { theta[ns + s].exp() } else { h };
                (h, v)
            })
            .collect()
    };
    let evaluate = |theta: &[f64]| -> (f64, Vec<f64>) { solve_sills(&pts, &ranges_of(theta), spec) };

    let mut best_theta = vec![0.0; axes];
    let mut best = (f64::INFINITY, Vec::new());
    if axes == 0 {
        best = evaluate(&[]);
    } else {
        let g = spec.grid.max(3);
        let grid_axis = |lo: f64, hi: f64| -> Vec<f64> {
            (0..g).map(|i| lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (g - 1) as f64).collect()
        };
        let axis_values: Vec<Vec<f64>> =
            (0..axes).map(|a| if a < ns { grid_axis(hlo, hhi) } else { grid_axis(vlo, vhi) }).collect();
        let mut idx = vec![0usize; axes];
        loop {
            let theta: Vec<f64> = idx.iter().enumerate().map(|(a, &i)| axis_values[a][i]).collect();
            // Structures ordered by horizontal range to avoid duplicate work.
            if (1..ns).all(|s| theta[s] > theta[s - 1]) {
                let r = evaluate(&theta);
                if r.0 < best.0 {
                    best = r;
                    best_theta = theta;
                }
            }
            let mut a = 0;
            while a < axes {
                idx[a] += 1;
                if idx[a] < g {
                    break;
                }
                idx[a] = 0;
                a += 1;
            }
            if a == axes {
                break;
            }
        }
        // Compass refinement in log-range space.
        let mut step = (hhi.ln() - hlo.ln()) / (g - 1) as f64;
        while step > 1e-4 {
            let mut improved = false;
            for a in 0..axes {
                for sign in [1.0, -1.0] {
                    let mut cand = best_theta.clone();
                    cand[a] += sign * step;
                    let (lo, hi) = if a < ns { (hlo, hhi) } else { (vlo, vhi) };
                    if cand[a] < lo.ln() || cand[a] > hi.ln() {
                        continue;
                    }
                    let r = evaluate(&cand);
                    if r.0 < best.0 - 1e-15 * best.0.abs() {
                        best = r;
                        best_theta = cand;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
    }
    if !best.0.is_finite() {
        return Err(Error::Fit("no feasible nonnegative model".into()));
    }
    let coef = &best.1;
    let ranges = ranges_of(&best_theta);
    let nugget = if spec.nugget { coef[0] } else { 0.0 };
    let off = usize::from(spec.nugget);
    let structures: Vec<Spherical<T>> = ranges
        .iter()
        .enumerate()
        .filter(|(s, _)| coef[off + s] > 0.0)
        .map(|(s, &(h, v))| Spherical { sill: T::lit(coef[off + s]), range_h: T::lit(h), range_v: T::lit(v) })
        .collect();
    let model =
        VariogramModel::new(T::lit(nugget), structures).map_err(|e| Error::Fit(format!("degenerate fit: {e}")))?;
    let rmse = (pts
        .iter()
        .map(|p| {
            let dir = if p.vertical { Direction::Vertical { tolerance_deg: 0.0 } } else { Direction::Omni };
            let r = model.gamma_along(T::lit(p.h), dir).as_f64() - p.gamma;
            r * r
        })
        .sum::<f64>()
        / pts.len() as f64)
        .sqrt();
    Ok(VariogramFit { model, objective: best.0, rmse })
}

/// Nonnegative (optionally sum-constrained) weighted least squares for the
/// nugget and sills at fixed ranges, by enumeration of active sets.
fn solve_sills(pts: &[Point], ranges: &[(f64, f64)], spec: &FitSpec) -> (f64, Vec<f64>) {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    if spec.nugget {
        basis.push(vec![1.0; pts.len()]);
    }
    for &(ah, av) in ranges {
        basis.push(pts.iter().map(|p| spherical(p.h / if p.vertical { av } else { ah })).collect());
    }
    let k = basis.len();
    let mut best = (f64::INFINITY, vec![0.0; k]);
    for mask in 1u32..(1 << k) {
        let free: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
        let m = free.len();
        let eq = usize::from(spec.total_sill.is_some());
        let size = m + eq;
        let mut a = vec![vec![0.0; size + 1]; size];
        for (r, &i) in free.iter().enumerate() {
            for (c, &j) in free.iter().enumerate() {
                a[r][c] = pts.iter().enumerate().map(|(p, pt)| pt.weight * basis[i][p] * basis[j][p]).sum();
            }
            a[r][size] = pts.iter().enumerate().map(|(p, pt)| pt.weight * basis[i][p] * pt.gamma).sum();
            if eq == 1 {
                a[r][m] = 1.0;
            }
        }
        if let Some(total) = spec.total_sill {
            for c in 0..m {
                a[m][c] = 1.0;
            }
            a[m][size] = total;
        }
        let Some(sol) = gauss_solve(a) else { continue };
        if sol[..m].iter().any(|&c| c < 0.0) {
            continue;
        }
        let mut coef = vec![0.0; k];
        for (r, &i) in free.iter().enumerate() {
            coef[i] = sol[r];
        }
        let obj: f64 = pts
            .iter()
            .enumerate()
            .map(|(p, pt)| {
                let fit: f64 = (0..k).map(|i| coef[i] * basis[i][p]).sum();
                pt.weight * (fit - pt.gamma).powi(2)
            })
            .sum();
        if obj < best.0 {
            best = (obj, coef);
        }
    }
    best
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn gauss_solve(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let n = a.len();
    let scale = a.iter().flat_map(|r| r[..n].iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-13 * scale.max(1e-300) {
            return None;
        }
        a.swap(col, piv);
        for r in (col + 1)..n {
            let f = a[r][col] / a[col][col];
            for c in col..=n {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = ((r + 1)..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (a[r][n] - s) / a[r][r];
    }
    Some(x)
}
