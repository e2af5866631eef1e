//! Weighted univariate helpers: plotting positions, quantiles, correlations
//! and the Kolmogorov-Smirnov distance against the standard normal.

use crate::scalar::{norm_cdf, Real};

/// Indices that sort `values` ascending; ties keep their input order.
pub fn argsort<T: Real>(values: &[T]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    idx
}

/// Mid-weight cumulative probabilities `(cumweight_below + w_i/2) / W` for
/// each sample, in input order. Tied values share the probability of their
/// group (midrank).
pub fn plotting_positions<T: Real>(values: &[T], weights: &[T]) -> Vec<T> {
    let order = argsort(values);
    let total: T = weights.iter().copied().sum();
    let mut out = vec![T::zero(); values.len()];
    let mut below = T::zero();
    let mut k = 0;
    while k < order.len() {
        let mut end = k;
        let mut group_w = T::zero();
        while end < order.len() && values[order[end]] == values[order[k]] {
            group_w += weights[order[end]];
            end += 1;
        }
        let p = (below + group_w / T::lit(2.0)) / total;
        for &i in &order[k..end] {
            out[i] = p;
        }
        below += group_w;
        k = end;
    }
    out
}

/// Weighted quantile by linear interpolation through the mid-weight plotting
/// positions of the sorted sample; probabilities outside the first/last
/// position clamp to the extreme values.
pub fn weighted_quantile<T: Real>(values: &[T], weights: &[T], probs: &[T]) -> Vec<T> {
    let (xs, ps) = quantile_knots(values, weights);
    probs.iter().map(|&p| interp_quantile(&xs, &ps, p)).collect()
}

/// Distinct sorted values and their mid-weight plotting positions.
pub(crate) fn quantile_knots<T: Real>(values: &[T], weights: &[T]) -> (Vec<T>, Vec<T>) {
    let order = argsort(values);
    let total: T = weights.iter().copied().sum();
    let mut xs = Vec::new();
    let mut ps = Vec::new();
    let mut below = T::zero();
    let mut k = 0;
    while k < order.len() {
        let v = values[order[k]];
        let mut group_w = T::zero();
        while k < order.len() && values[order[k]] == v {
            group_w += weights[order[k]];
            k += 1;
        }
        xs.push(v);
        ps.push((below + group_w / T::lit(2.0)) / total);
        below += group_w;
    }
    (xs, ps)
}

pub(crate) fn interp_quantile<T: Real>(xs: &[T], ps: &[T], p: T) -> T {
    let n = xs.len();
    if p <= ps[0] {
        return xs[0];
    }
    if p >= ps[n - 1] {
        return xs[n - 1];
    }
    let k = ps.partition_point(|&q| q <= p) - 1;
    let f = (p - ps[k]) / (ps[k + 1] - ps[k]);
    xs[k] + f * (xs[k + 1] - xs[k])
}

pub fn weighted_mean<T: Real>(x: &[T], w: &[T]) -> T {
    let total: T = w.iter().copied().sum();
    x.iter().zip(w).map(|(&a, &b)| a * b).sum::<T>() / total
}

/// Weighted population variance (divisor = total weight).
pub fn weighted_variance<T: Real>(x: &[T], w: &[T]) -> T {
    let m = weighted_mean(x, w);
    let total: T = w.iter().copied().sum();
    x.iter().zip(w).map(|(&a, &b)| b * (a - m) * (a - m)).sum::<T>() / total
}

/// Weighted Pearson correlation; `None` if either variance is zero.
pub fn weighted_pearson<T: Real>(x: &[T], y: &[T], w: &[T]) -> Option<T> {
    let mx = weighted_mean(x, w);
    let my = weighted_mean(y, w);
    let mut sxy = T::zero();
    let mut sxx = T::zero();
    let mut syy = T::zero();
    for i in 0..x.len() {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxy += w[i] * dx * dy;
        sxx += w[i] * dx * dx;
        syy += w[i] * dy * dy;
    }
    if sxx <= T::zero() || syy <= T::zero() {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).max(-T::one()).min(T::one()))
}

/// Weighted Spearman correlation: Pearson on weighted fractional midranks.
pub fn weighted_spearman<T: Real>(x: &[T], y: &[T], w: &[T]) -> Option<T> {
    let rx = plotting_positions(x, w);
    let ry = plotting_positions(y, w);
    weighted_pearson(&rx, &ry, w)
}

pub fn pearson<T: Real>(x: &[T], y: &[T]) -> Option<T> {
    let w = vec![T::one(); x.len()];
    weighted_pearson(x, y, &w)
}

pub fn spearman<T: Real>(x: &[T], y: &[T]) -> Option<T> {
    let w = vec![T::one(); x.len()];
    weighted_spearman(x, y, &w)
}

/// Kolmogorov-Smirnov distance of a sample against N(0, 1).
pub fn ks_statistic_normal<T: Real>(x: &[T]) -> T {
    let mut s: Vec<T> = x.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = T::of_usize(s.len());
    let mut d = T::zero();
    for (i, &v) in s.iter().enumerate() {
        let f = norm_cdf(v);
        let lo = T::of_usize(i) / n;
        let hi = T::of_usize(i + 1) / n;
        d = d.max((f - lo).abs()).max((hi - f).abs());
    }
    d
}

/// Asymptotic Kolmogorov p-value for statistic `d` at sample size `n`.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = 2.0 * (-1.0f64).powi(k - 1) * (-2.0 * kf * kf * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}
