//! Flow anamorphosis: points are advected by the velocity field that carries a
//! Gaussian kernel density of the (standardized) anchors onto an isotropic
//! Gaussian. Kernel centres shrink linearly to the origin while the kernel
//! spread moves from `sigma0` to `sigma1`.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Exponent (in units of `d²/2σ²`) beyond the closest kernel below which a
/// kernel's weight is dropped.
const PRUNE_EXPONENT: f64 = 40.0;

/// Per-variable affine map `y = (x − mean) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Standardizer<T: Real> {
    pub mean: Vec<T>,
    pub scale: Vec<T>,
}

impl<T: Real> Standardizer<T> {
    /// Column means and population standard deviations of `data`.
    pub fn fit(data: ArrayView2<T>) -> Result<Self> {
        let n = data.nrows();
        if n < 2 {
            return Err(Error::EmptyData);
        }
        let nf = T::of_usize(n);
        let mut mean = Vec::with_capacity(data.ncols());
        let mut scale = Vec::with_capacity(data.ncols());
        for (j, col) in data.columns().into_iter().enumerate() {
            let m = col.iter().copied().sum::<T>() / nf;
            let s = (col.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / nf).sqrt();
            if !(s > T::zero()) {
                return Err(Error::DegenerateVariable(format!("column {j}")));
            }
            mean.push(m);
            scale.push(s);
        }
        Ok(Self { mean, scale })
    }

    pub fn apply(&self, x: &mut [T]) {
        for ((v, &m), &s) in x.iter_mut().zip(&self.mean).zip(&self.scale) {
            *v = (*v - m) / s;
        }
    }

    pub fn invert(&self, y: &mut [T]) {
        for ((v, &m), &s) in y.iter_mut().zip(&self.mean).zip(&self.scale) {
            *v = *v * s + m;
        }
    }

    pub fn apply_rows(&self, data: ArrayView2<T>) -> Array2<T> {
        let mut out = data.to_owned();
        for mut row in out.rows_mut() {
            self.apply(row.as_slice_mut().expect("standard layout"));
        }
        out
    }
}

/// One flow pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", try_from = "FaStateRepr<T>", into = "FaStateRepr<T>")]
pub struct FaState<T: Real> {
    /// Kernel centres at t = 0, sorted by first coordinate.
    anchors: Array2<T>,
    sigma0: T,
    sigma1: T,
    steps: usize,
    standardizer: Standardizer<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "")]
struct FaStateRepr<T: Real> {
    anchors: Array2<T>,
    sigma0: T,
    sigma1: T,
    steps: usize,
    standardizer: Standardizer<T>,
}

impl<T: Real> TryFrom<FaStateRepr<T>> for FaState<T> {
    type Error = Error;

    fn try_from(r: FaStateRepr<T>) -> Result<Self> {
        FaState::new(r.anchors, r.sigma0, r.sigma1, r.steps, r.standardizer)
    }
}

impl<T: Real> From<FaState<T>> for FaStateRepr<T> {
    fn from(s: FaState<T>) -> Self {
        Self { anchors: s.anchors, sigma0: s.sigma0, sigma1: s.sigma1, steps: s.steps, standardizer: s.standardizer }
    }
}

/// Reusable buffers for velocity evaluation.
#[derive(Debug, Clone)]
pub struct FaScratch<T> {
    dist: Vec<T>,
    k: [Vec<T>; 5],
}

impl<T: Real> FaScratch<T> {
    pub fn new(dim: usize, anchors: usize) -> Self {
        let v = || vec![T::zero(); dim];
        Self { dist: Vec::with_capacity(anchors), k: [v(), v(), v(), v(), v()] }
    }
}

impl<T: Real> FaState<T> {
    pub fn new(anchors: Array2<T>, sigma0: T, sigma1: T, steps: usize, standardizer: Standardizer<T>) -> Result<Self> {
        if anchors.nrows() < 2 {
            return Err(Error::InvalidInput("flow needs at least two anchors".into()));
        }
        if !(sigma0 > T::zero()) || !(sigma1 > T::zero()) {
            return Err(Error::InvalidInput("kernel spreads must be positive".into()));
        }
        if steps < 4 {
            return Err(Error::InvalidInput("flow needs at least 4 steps".into()));
        }
        let d = anchors.ncols();
        if d == 0 || standardizer.mean.len() != d || standardizer.scale.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: standardizer.mean.len() });
        }
        if anchors.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite anchor".into()));
        }
        let mut order: Vec<usize> = (0..anchors.nrows()).collect();
        order.sort_by(|&a, &b| anchors[[a, 0]].partial_cmp(&anchors[[b, 0]]).expect("finite"));
        let anchors = anchors.select(ndarray::Axis(0), &order);
        Ok(Self { anchors, sigma0, sigma1, steps, standardizer })
    }

    fn anchor_slice(&self) -> &[T] {
        self.anchors.as_slice().expect("anchors are stored row-major")
    }

    pub fn anchors(&self) -> ArrayView2<'_, T> {
        self.anchors.view()
    }

    pub fn sigmas(&self) -> (T, T) {
        (self.sigma0, self.sigma1)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn standardizer(&self) -> &Standardizer<T> {
        &self.standardizer
    }

    pub fn dim(&self) -> usize {
        self.anchors.ncols()
    }

    /// Velocity at time `t` and standardized position `x`, written to `out`.
    pub fn velocity_into(&self, t: T, x: &[T], dist: &mut Vec<T>, out: &mut [T]) {
        let m = self.anchors.nrows();
        let d = self.dim();
        let shrink = T::one() - t;
        let sigma = shrink * self.sigma0 + t * self.sigma1;
        let rate = (self.sigma1 - self.sigma0) / sigma;
        let inv2 = T::one() / (T::lit(2.0) * sigma * sigma);
        let cut = T::lit(PRUNE_EXPONENT);

        // Candidate window on the first coordinate.
        let (mut lo, mut hi) = (0, m);
        if shrink > T::lit(1e-12) {
            let half = (T::lit(2.0) * cut / inv2).sqrt() / shrink;
            let centre = x[0] / shrink;
            let col = self.anchors.column(0);
            lo = lower_bound(|i| col[i] < centre - half, 0, m);
            hi = lower_bound(|i| col[i] <= centre + half, lo, m);
        }

        let mut best = self.scan(lo, hi, x, shrink, inv2, dist);
        if lo == hi || best > cut {
            lo = 0;
            hi = m;
            best = self.scan(lo, hi, x, shrink, inv2, dist);
        }

        for v in dist.iter_mut() {
            let e = *v - best;
            *v = if e > cut { T::zero() } else { T::exp_neg(e) };
        }
        let rows = &self.anchor_slice()[lo * d..hi * d];
        let total = match d {
            1 => accumulate_fixed::<T, 1>(rows, dist, out),
            2 => accumulate_fixed::<T, 2>(rows, dist, out),
            3 => accumulate_fixed::<T, 3>(rows, dist, out),
            _ => accumulate_dyn(rows, dist, out),
        };
        for j in 0..d {
            let abar = out[j] / total;
            out[j] = -abar + rate * (x[j] - shrink * abar);
        }
    }

    /// Fills `dist` with scaled squared distances for anchors `lo..hi` and
    /// returns the smallest.
    fn scan(&self, lo: usize, hi: usize, x: &[T], shrink: T, inv2: T, dist: &mut Vec<T>) -> T {
        let d = x.len();
        dist.clear();
        let rows = &self.anchor_slice()[lo * d..hi * d];
        match d {
            1 => scan_fixed::<T, 1>(rows, x, shrink, inv2, dist),
            2 => scan_fixed::<T, 2>(rows, x, shrink, inv2, dist),
            3 => scan_fixed::<T, 3>(rows, x, shrink, inv2, dist),
            _ => dist.extend(rows.chunks_exact(d).map(|a| {
                let mut s = T::zero();
                for (&xv, &av) in x.iter().zip(a) {
                    let diff = xv - shrink * av;
                    s += diff * diff;
                }
                s * inv2
            })),
        }
        min_lanes(dist)
    }

    fn integrate(&self, x: &mut [T], forward: bool, scratch: &mut FaScratch<T>) -> Result<()> {
        let d = x.len();
        let h = T::one() / T::of_usize(self.steps);
        let (h, mut t) = if forward { (h, T::zero()) } else { (-h, T::one()) };
        let half = T::lit(0.5);
        let FaScratch { dist, k } = scratch;
        let [k1, k2, k3, k4, tmp] = k;
        for s in 0..self.steps {
            self.velocity_into(t, x, dist, k1);
            for j in 0..d {
                tmp[j] = x[j] + half * h * k1[j];
            }
            self.velocity_into(t + half * h, tmp, dist, k2);
            for j in 0..d {
                tmp[j] = x[j] + half * h * k2[j];
            }
            self.velocity_into(t + half * h, tmp, dist, k3);
            for j in 0..d {
                tmp[j] = x[j] + h * k3[j];
            }
            let t_next = if s + 1 == self.steps {
                if forward {
                    T::one()
                } else {
                    T::zero()
                }
            } else {
                t + h
            };
            self.velocity_into(t_next, tmp, dist, k4);
            for j in 0..d {
                x[j] += h / T::lit(6.0) * (k1[j] + T::lit(2.0) * (k2[j] + k3[j]) + k4[j]);
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::IntegrationFailure { steps: self.steps });
            }
            t = t_next;
        }
        Ok(())
    }

    /// Original coordinates → flow output, in place.
    pub fn forward_point(&self, x: &mut [T], scratch: &mut FaScratch<T>) -> Result<()> {
        self.standardizer.apply(x);
        self.integrate(x, true, scratch)
    }

    /// Flow output → original coordinates, in place.
    pub fn inverse_point(&self, y: &mut [T], scratch: &mut FaScratch<T>) -> Result<()> {
        self.integrate(y, false, scratch)?;
        self.standardizer.invert(y);
        Ok(())
    }
}

fn scan_fixed<T: Real, const D: usize>(rows: &[T], x: &[T], shrink: T, inv2: T, dist: &mut Vec<T>) {
    let xs: [T; D] = std::array::from_fn(|j| x[j]);
    dist.extend(rows.chunks_exact(D).map(|a| {
        let mut s = T::zero();
        for j in 0..D {
            let diff = xs[j] - shrink * a[j];
            s += diff * diff;
        }
        s * inv2
    }));
}

const LANES: usize = 4;

/// Smallest value, reduced over independent lanes.
fn min_lanes<T: Real>(v: &[T]) -> T {
    let mut m = [T::infinity(); LANES];
    let mut chunks = v.chunks_exact(LANES);
    for c in &mut chunks {
        for l in 0..LANES {
            m[l] = if c[l] < m[l] { c[l] } else { m[l] };
        }
    }
    let mut best = m.into_iter().fold(T::infinity(), |a, b| if b < a { b } else { a });
    for &e in chunks.remainder() {
        best = if e < best { e } else { best };
    }
    best
}

/// Weighted anchor sum into `out`; returns the total weight. Sums run over
/// independent lanes combined in a fixed order.
fn accumulate_fixed<T: Real, const D: usize>(rows: &[T], w: &[T], out: &mut [T]) -> T {
    let mut acc = [[T::zero(); D]; LANES];
    let mut tot = [T::zero(); LANES];
    let mut rc = rows.chunks_exact(D * LANES);
    let mut wc = w.chunks_exact(LANES);
    for (r, ww) in (&mut rc).zip(&mut wc) {
        for l in 0..LANES {
            tot[l] += ww[l];
            for j in 0..D {
                acc[l][j] += ww[l] * r[l * D + j];
            }
        }
    }
    for (a, &wk) in rc.remainder().chunks_exact(D).zip(wc.remainder()) {
        tot[0] += wk;
        for j in 0..D {
            acc[0][j] += wk * a[j];
        }
    }
    for j in 0..D {
        out[j] = (acc[0][j] + acc[1][j]) + (acc[2][j] + acc[3][j]);
    }
    (tot[0] + tot[1]) + (tot[2] + tot[3])
}

fn accumulate_dyn<T: Real>(rows: &[T], w: &[T], out: &mut [T]) -> T {
    let d = out.len();
    out.iter_mut().for_each(|v| *v = T::zero());
    let mut total = T::zero();
    for (a, &wk) in rows.chunks_exact(d).zip(w) {
        total += wk;
        for (o, &av) in out.iter_mut().zip(a) {
            *o += wk * av;
        }
    }
    total
}

/// First index in `lo..hi` where `pred` is false (pred must be monotone).
fn lower_bound(pred: impl Fn(usize) -> bool, mut lo: usize, mut hi: usize) -> usize {
    while lo < hi {
        let mid = (lo + hi) / 2;
        if pred(mid) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Flow velocity at time `t` for a standardized position `x`.
pub fn fa_velocity<T: Real>(state: &FaState<T>, t: T, x: &[T]) -> Result<Vec<T>> {
    if x.len() != state.dim() {
        return Err(Error::DimensionMismatch { expected: state.dim(), found: x.len() });
    }
    if !(t >= T::zero() && t <= T::one()) {
        return Err(Error::InvalidInput(format!("time {t} outside [0, 1]")));
    }
    let mut dist = Vec::with_capacity(state.anchors.nrows());
    let mut out = vec![T::zero(); x.len()];
    state.velocity_into(t, x, &mut dist, &mut out);
    Ok(out)
}
