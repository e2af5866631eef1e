//! Marginal Gaussianization: monotone quantile tables pairing original values
//! with standard normal scores, with linear tails on both sides.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{norm_quantile, Real};
use crate::stats;

/// Values closer than this fraction of the sample range share one knot.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Relative distance below which an inverse lookup lands on a knot.
pub const KNOT_SNAP: f64 = 1e-13;

/// How knots of a [`GaussianTable`] are placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum MarginalMode {
    /// One knot per distinct value.
    NormalScore,
    /// Knots at `bins` equal-probability quantiles of the weighted CDF.
    HistogramEqualization { bins: usize },
}

impl MarginalMode {
    pub const DEFAULT_BINS: usize = 1000;

    pub fn histogram_equalization() -> Self {
        MarginalMode::HistogramEqualization { bins: Self::DEFAULT_BINS }
    }
}

/// Piecewise-linear monotone map between original values `z` and Gaussian
/// scores `y`.
/// Inverse lookup beyond the extreme knots.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tails {
    /// Linear extrapolation with the stored tail slopes.
    #[default]
    Linear,
    /// Scores beyond the knot span map to the extreme knot values.
    Clamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GaussianTable<T: Real> {
    z: Vec<T>,
    y: Vec<T>,
    lower_slope: T,
    upper_slope: T,
}

impl<T: Real> GaussianTable<T> {
    /// Assembles a table from knots; tail slopes are those of the first and
    /// last segments.
    pub fn from_knots(z: Vec<T>, y: Vec<T>) -> Result<Self> {
        if z.len() != y.len() {
            return Err(Error::DimensionMismatch { expected: z.len(), found: y.len() });
        }
        if z.len() < 2 {
            return Err(Error::DegenerateMarginal);
        }
        let increasing = |v: &[T]| v.windows(2).all(|w| w[1] > w[0]);
        if !increasing(&z) || !increasing(&y) || z.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("table knots must be finite and strictly increasing".into()));
        }
        let k = z.len();
        let lower_slope = (y[1] - y[0]) / (z[1] - z[0]);
        let upper_slope = (y[k - 1] - y[k - 2]) / (z[k - 1] - z[k - 2]);
        Ok(Self { z, y, lower_slope, upper_slope })
    }

    pub fn z(&self) -> &[T] {
        &self.z
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    pub fn tail_slopes(&self) -> (T, T) {
        (self.lower_slope, self.upper_slope)
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// Original value → Gaussian score.
    pub fn forward(&self, x: T) -> Result<T> {
        if !x.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite value {x}")));
        }
        Ok(self.forward_unchecked(x))
    }

    /// Gaussian score → original value.
    pub fn inverse(&self, y: T) -> Result<T> {
        if !y.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite score {y}")));
        }
        Ok(self.inverse_unchecked(y))
    }

    /// Gaussian score → original value with the given tail rule.
    pub fn inverse_with(&self, y: T, tails: Tails) -> Result<T> {
        if !y.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite score {y}")));
        }
        Ok(self.inverse_tails(y, tails))
    }

    #[inline]
    pub(crate) fn inverse_tails(&self, y: T, tails: Tails) -> T {
        let k = self.y.len();
        match tails {
            Tails::Clamp if y <= self.y[0] => self.z[0],
            Tails::Clamp if y >= self.y[k - 1] => self.z[k - 1],
            _ => self.inverse_unchecked(y),
        }
    }

    #[inline]
    pub(crate) fn forward_unchecked(&self, x: T) -> T {
        interp(&self.z, &self.y, self.lower_slope, self.upper_slope, x)
    }

    /// Scores within [`KNOT_SNAP`] (relative) of a knot return that knot's
    /// value, so rounding left by a preceding rotation is not amplified by
    /// the slope of an arbitrary adjacent segment.
    #[inline]
    pub(crate) fn inverse_unchecked(&self, y: T) -> T {
        let tol = T::lit(KNOT_SNAP) * (T::one() + y.abs());
        let i = self.y.partition_point(|&v| v < y);
        if i < self.y.len() && self.y[i] - y <= tol {
            return self.z[i];
        }
        if i > 0 && y - self.y[i - 1] <= tol {
            return self.z[i - 1];
        }
        let inv = |s: T| T::one() / s;
        interp(&self.y, &self.z, inv(self.lower_slope), inv(self.upper_slope), y)
    }
}

#[inline]
fn interp<T: Real>(xs: &[T], ys: &[T], lower: T, upper: T, x: T) -> T {
    let k = xs.len();
    if x <= xs[0] {
        return ys[0] + lower * (x - xs[0]);
    }
    if x >= xs[k - 1] {
        return ys[k - 1] + upper * (x - xs[k - 1]);
    }
    let i = xs.partition_point(|&v| v <= x) - 1;
    if x == xs[i] {
        return ys[i];
    }
    ys[i] + (ys[i + 1] - ys[i]) * ((x - xs[i]) / (xs[i + 1] - xs[i]))
}

/// Builds a Gaussian table from a weighted sample.
pub fn build_gaussian_table<T: Real>(values: &[T], weights: &[T], mode: MarginalMode) -> Result<GaussianTable<T>> {
    if values.len() != weights.len() {
        return Err(Error::DimensionMismatch { expected: values.len(), found: weights.len() });
    }
    if values.len() < 2 {
        return Err(Error::DegenerateMarginal);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite value in marginal".into()));
    }
    if weights.iter().any(|&w| !(w > T::zero())) {
        return Err(Error::InvalidInput("weights must be positive".into()));
    }
    let order = stats::argsort(values);
    let (lo, hi) = (values[order[0]], values[order[order.len() - 1]]);
    if !(hi > lo) {
        return Err(Error::DegenerateMarginal);
    }
    let tol = (hi - lo) * T::lit(TIE_TOLERANCE);
    let distinct = 1 + order.windows(2).filter(|w| values[w[1]] - values[w[0]] > tol).count();
    match mode {
        MarginalMode::HistogramEqualization { bins } if bins < distinct => {
            histogram_equalization(values, weights, bins.max(2), tol)
        }
        _ => normal_score(values, weights, &order, tol),
    }
}

fn normal_score<T: Real>(values: &[T], weights: &[T], order: &[usize], tol: T) -> Result<GaussianTable<T>> {
    let total: T = weights.iter().copied().sum();
    let half = T::lit(0.5);
    let mut z = Vec::new();
    let mut y = Vec::new();
    let mut below = T::zero();
    let mut k = 0;
    while k < order.len() {
        let v = values[order[k]];
        let mut score_sum = T::zero();
        let mut count = 0usize;
        while k < order.len() && values[order[k]] - v <= tol {
            let w = weights[order[k]];
            score_sum += norm_quantile((below + half * w) / total);
            below += w;
            count += 1;
            k += 1;
        }
        z.push(v);
        y.push(score_sum / T::of_usize(count));
    }
    GaussianTable::from_knots(z, y)
}

fn histogram_equalization<T: Real>(values: &[T], weights: &[T], bins: usize, tol: T) -> Result<GaussianTable<T>> {
    let (xs, ps) = stats::quantile_knots(values, weights);
    let (p_lo, p_hi) = (ps[0], ps[ps.len() - 1]);
    let mut probs = vec![p_lo];
    for k in 0..bins {
        let p = (T::of_usize(k) + T::lit(0.5)) / T::of_usize(bins);
        if p > p_lo && p < p_hi {
            probs.push(p);
        }
    }
    probs.push(p_hi);
    let mut z: Vec<T> = Vec::with_capacity(probs.len());
    let mut y: Vec<T> = Vec::with_capacity(probs.len());
    for p in probs {
        let q = stats::interp_quantile(&xs, &ps, p);
        let g = norm_quantile(p);
        if let (Some(&zl), Some(&yl)) = (z.last(), y.last()) {
            if !(q > zl + tol) || !(g > yl) {
                continue;
            }
        }
        z.push(q);
        y.push(g);
    }
    GaussianTable::from_knots(z, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn ns(values: &[f64]) -> GaussianTable<f64> {
        build_gaussian_table(values, &vec![1.0; values.len()], MarginalMode::NormalScore).unwrap()
    }

    #[test]
    fn five_point_normal_scores() {
        // Oracle: Φ⁻¹ of p = (0.1, 0.3, 0.5, 0.7, 0.9).
        let t = ns(&[3.0, 1.0, 5.0, 2.0, 4.0]);
        let expected = [-1.281_551_565_545, -0.524_400_512_708, 0.0, 0.524_400_512_708, 1.281_551_565_545];
        for (a, b) in t.y().iter().zip(expected) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        assert_eq!(t.forward(3.0).unwrap(), 0.0);
        assert_eq!(t.inverse(0.0).unwrap(), 3.0);
    }

    #[test]
    fn doubling_weights_gives_identical_table() {
        let v = [0.3, 1.7, 0.2, 5.0, 2.2, 2.2];
        let w = [1.0, 2.0, 0.5, 1.5, 1.0, 3.0];
        let w2: Vec<f64> = w.iter().map(|x| 2.0 * x).collect();
        for mode in [MarginalMode::NormalScore, MarginalMode::HistogramEqualization { bins: 3 }] {
            assert_eq!(build_gaussian_table(&v, &w, mode).unwrap(), build_gaussian_table(&v, &w2, mode).unwrap());
        }
    }

    #[test]
    fn interpolation_and_tails() {
        let t = ns(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let mid = t.forward(1.5).unwrap();
        assert!((mid - 0.5 * (t.y()[0] + t.y()[1])).abs() < 1e-15);
        let (lo, hi) = t.tail_slopes();
        let above = t.forward(7.0).unwrap();
        assert!((above - (t.y()[4] + hi * 2.0)).abs() < 1e-15 && above > t.y()[4]);
        let below = t.inverse(-3.0).unwrap();
        assert!((below - (1.0 + (-3.0 - t.y()[0]) / lo)).abs() < 1e-12 && below < 1.0);
        assert!(t.forward(f64::NAN).is_err());
        assert!(t.inverse(f64::INFINITY).is_err());
    }

    #[test]
    fn ties_collapse_to_mean_score() {
        let t = ns(&[1.0, 2.0, 2.0, 3.0]);
        assert_eq!(t.len(), 3);
        let expect = 0.5 * (norm_quantile(0.375) + norm_quantile(0.625));
        assert!((t.y()[1] - expect).abs() < 1e-15);
    }

    #[test]
    fn constant_input_is_degenerate() {
        let r = build_gaussian_table(&[2.0, 2.0, 2.0], &[1.0; 3], MarginalMode::NormalScore);
        assert!(matches!(r, Err(Error::DegenerateMarginal)));
    }

    #[test]
    fn uniform_inputs_become_standard_normal() {
        let mut rng = crate::rng::rng_from(11);
        let v: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let t = ns(&v);
        let y: Vec<f64> = v.iter().map(|&x| t.forward(x).unwrap()).collect();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let sd = (y.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / y.len() as f64).sqrt();
        assert!(mean.abs() <= 0.01);
        assert!((0.98..=1.02).contains(&sd));
        let d = stats::ks_statistic_normal(&y);
        assert!(stats::ks_pvalue(d, y.len()) > 0.01);
    }

    #[test]
    fn histogram_equalization_with_enough_bins_matches_normal_score() {
        let mut rng = crate::rng::rng_from(3);
        let v: Vec<f64> = (0..300).map(|_| rng.random::<f64>().powi(3)).collect();
        let w = vec![1.0; v.len()];
        let a = build_gaussian_table(&v, &w, MarginalMode::NormalScore).unwrap();
        let b = build_gaussian_table(&v, &w, MarginalMode::HistogramEqualization { bins: 300 }).unwrap();
        let c = build_gaussian_table(&v, &w, MarginalMode::HistogramEqualization { bins: 50 }).unwrap();
        for &x in &v {
            assert!((a.forward(x).unwrap() - b.forward(x).unwrap()).abs() < 1e-6);
            assert!((c.inverse(c.forward(x).unwrap()).unwrap() - x).abs() < 1e-12);
        }
        assert!(c.len() <= 52);
    }

    #[test]
    fn f32_tables_work() {
        let t = build_gaussian_table(&[1.0f32, 2.0, 3.0], &[1.0; 3], MarginalMode::NormalScore).unwrap();
        assert_eq!(t.forward(2.0).unwrap(), 0.0f32);
    }

    proptest! {
        #[test]
        fn round_trip_and_monotone(
            vals in proptest::collection::vec(-100.0f64..100.0, 2..60),
            ws in proptest::collection::vec(0.1f64..3.0, 60),
            probe in proptest::collection::vec(-150.0f64..150.0, 1..20),
            bins in 2usize..40,
        ) {
            let w = &ws[..vals.len()];
            let distinct = { let mut s = vals.clone(); s.sort_by(|a, b| a.partial_cmp(b).unwrap()); s.dedup(); s.len() };
            prop_assume!(distinct >= 2);
            for mode in [MarginalMode::NormalScore, MarginalMode::HistogramEqualization { bins }] {
                let t = build_gaussian_table(&vals, w, mode).unwrap();
                let (zmin, zmax) = (t.z()[0], t.z()[t.len() - 1]);
                for &x in &probe {
                    let y = t.forward(x).unwrap();
                    let back = t.inverse(y).unwrap();
                    let tol = 1e-12 * (1.0 + x.abs()) * if x < zmin || x > zmax { 1e3 } else { 1.0 };
                    prop_assert!((back - x).abs() <= tol, "{x} -> {y} -> {back}");
                }
                let mut prev = f64::NEG_INFINITY;
                for k in 0..400 {
                    let x = -150.0 + 0.75 * k as f64;
                    let y = t.forward(x).unwrap();
                    prop_assert!(y > prev);
                    prev = y;
                }
            }
        }
    }
}
