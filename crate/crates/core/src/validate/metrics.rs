//! Histogram, variogram and correlation reproduction metrics.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spatial::{DecorrelationMetrics, VariogramSet};
use crate::stats;

use super::mvn::MvnResult;

/// RMSE between the 1st–100th percentiles of the weighted original sample
/// and the pooled simulated values.
pub fn cdf_rmse<T: Real>(original: &[T], weights: &[T], simulated: &[T]) -> Result<T> {
    if original.is_empty() || simulated.is_empty() {
        return Err(Error::Metric("cdf_rmse needs non-empty samples".into()));
    }
    if weights.len() != original.len() {
        return Err(Error::DimensionMismatch { expected: original.len(), found: weights.len() });
    }
    let probs: Vec<T> = (1..=100).map(|k| T::lit(k as f64 / 100.0)).collect();
    let q0 = stats::weighted_quantile(original, weights, &probs);
    let ones = vec![T::one(); simulated.len()];
    let q1 = stats::weighted_quantile(simulated, &ones, &probs);
    let mse = q0.iter().zip(&q1).map(|(a, b)| (*a - *b) * (*a - *b)).sum::<T>() / T::lit(100.0);
    Ok(mse.sqrt())
}

/// Per variable-pair RMSE (d×d) between the reference γ and the mean γ over
/// realizations, on lags defined in the reference and in at least one
/// realization.
pub fn variogram_rmse<T: Real>(reference: &VariogramSet<T>, realizations: &[VariogramSet<T>]) -> Result<Array2<T>> {
    if realizations.is_empty() {
        return Err(Error::Metric("no realization variograms".into()));
    }
    let d = reference.dim();
    for r in realizations {
        if r.lags != reference.lags {
            return Err(Error::Metric("realization variograms use a different lag grid".into()));
        }
        if r.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: r.dim() });
        }
    }
    let mut sse = Array2::<T>::zeros((d, d));
    let mut used = 0usize;
    for k in 0..reference.len() {
        if !reference.is_defined(k) {
            continue;
        }
        let defined: Vec<&Array2<T>> = realizations.iter().filter(|r| r.is_defined(k)).map(|r| &r.gamma[k]).collect();
        if defined.is_empty() {
            continue;
        }
        let mut mean = Array2::<T>::zeros((d, d));
        for g in &defined {
            mean += *g;
        }
        mean /= T::of_usize(defined.len());
        let diff = &mean - &reference.gamma[k];
        sse += &diff.mapv(|v| v * v);
        used += 1;
    }
    if used == 0 {
        return Err(Error::Metric("no common lags with pairs".into()));
    }
    Ok(sse.mapv(|v| (v / T::of_usize(used)).sqrt()))
}

/// Box-plot summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl BoxStats {
    /// Quartiles by linear interpolation between order statistics.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let h = p * (s.len() - 1) as f64;
            let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
            s[lo] + (h - lo as f64) * (s[hi] - s[lo])
        };
        Some(Self { min: s[0], q1: q(0.25), median: q(0.5), q3: q(0.75), max: s[s.len() - 1] })
    }

    pub fn iqr_contains(&self, v: f64) -> bool {
        self.q1 <= v && v <= self.q3
    }
}

/// Correlation of one variable pair: original vs per-realization values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReproduction {
    pub pair: (usize, usize),
    pub original_pearson: f64,
    pub original_spearman: f64,
    pub pearson: Vec<f64>,
    pub spearman: Vec<f64>,
    pub pearson_box: Option<BoxStats>,
    pub spearman_box: Option<BoxStats>,
}

impl CorrelationReproduction {
    pub fn new(pair: (usize, usize), original: (f64, f64), pearson: Vec<f64>, spearman: Vec<f64>) -> Self {
        Self {
            pair,
            original_pearson: original.0,
            original_spearman: original.1,
            pearson_box: BoxStats::of(&pearson),
            spearman_box: BoxStats::of(&spearman),
            pearson,
            spearman,
        }
    }

    /// Both box-plot interquartile ranges contain the original coefficients.
    pub fn reproduced(&self) -> bool {
        matches!((self.pearson_box, self.spearman_box), (Some(p), Some(s))
            if p.iqr_contains(self.original_pearson) && s.iqr_contains(self.original_spearman))
    }
}

/// Variogram RMSE of one pair in one direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRmse {
    pub direction: String,
    pub pair: (usize, usize),
    pub rmse: f64,
}

/// Everything the validation stage reports.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub variables: Vec<String>,
    pub cdf_rmse: Vec<f64>,
    pub interquartile_range: Vec<f64>,
    pub variogram_rmse: Vec<PairRmse>,
    pub correlations: Vec<CorrelationReproduction>,
    pub mvn: Vec<MvnResult>,
    pub tau_kappa_mgt: Option<DecorrelationMetrics<f64>>,
    pub tau_kappa_maf: Option<DecorrelationMetrics<f64>>,
    /// Fraction of simulated pairs satisfying `second ≤ first`, when relevant.
    pub inequality_fraction: Option<f64>,
    /// Set when realizations were back-transformed without the transposed MAF step.
    pub maf_bypassed: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::Direction;

    #[test]
    fn cdf_rmse_identity_and_shift() {
        let x: Vec<f64> = (0..500).map(|i| (i as f64 * 0.37).sin() * 3.0 + i as f64 / 100.0).collect();
        let w = vec![1.0; x.len()];
        assert_eq!(cdf_rmse(&x, &w, &x).unwrap(), 0.0);
        let y: Vec<f64> = x.iter().map(|v| v + 0.7).collect();
        assert!((cdf_rmse(&x, &w, &y).unwrap() - 0.7).abs() < 1e-9);
        assert!(cdf_rmse::<f64>(&[], &[], &x).is_err());
    }

    fn flat(v: f64, counts: Vec<u64>) -> VariogramSet<f64> {
        let n = counts.len();
        VariogramSet {
            lags: (1..=n).map(|k| k as f64).collect(),
            direction: Direction::Omni,
            counts,
            gamma: vec![Array2::from_elem((2, 2), v); n],
        }
    }

    #[test]
    fn variogram_rmse_cases() {
        let r = flat(1.0, vec![5, 5, 0]);
        assert!(variogram_rmse(&r, std::slice::from_ref(&r)).unwrap().iter().all(|v| *v == 0.0));
        let s = variogram_rmse(&r, &[flat(0.9, vec![5, 5, 5]), flat(0.9, vec![5, 0, 5])]).unwrap();
        assert!(s.iter().all(|v| (v - 0.1).abs() < 1e-12));
        assert!(variogram_rmse(&r, &[flat(1.0, vec![0, 0, 5])]).is_err());
    }

    #[test]
    fn box_stats() {
        let b = BoxStats::of(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!((b.q1, b.median, b.q3), (2.0, 3.0, 4.0));
        assert!(b.iqr_contains(2.5) && !b.iqr_contains(4.5));
        let c = CorrelationReproduction::new((0, 1), (0.5, 0.6), vec![0.4, 0.5, 0.6], vec![0.55, 0.6, 0.7]);
        assert!(c.reproduced());
    }
}
