//! Henze-Zirkler and energy tests of multivariate normality.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use ndarray::{Array2, ArrayView2};
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::{derive_seed, rng_from};
use crate::scalar::{phi, Real};

pub const DEFAULT_REPLICATES: usize = 199;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MvnMethod {
    HenzeZirkler,
    Energy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MvnResult {
    pub method: MvnMethod,
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
    pub d: usize,
}

impl MvnResult {
    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value >= alpha
    }
}

fn to_f64<T: Real>(data: ArrayView2<T>) -> Result<Array2<f64>> {
    let (n, d) = data.dim();
    if d == 0 || n <= d {
        return Err(Error::Test(format!("need n > d ≥ 1, got n={n}, d={d}")));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Test("non-finite values".into()));
    }
    Ok(data.mapv(|v| v.as_f64()))
}

/// Rows centered and whitened by the covariance with divisor `n − ddof`.
fn whiten(x: &Array2<f64>, ddof: usize) -> Result<Array2<f64>> {
    let (n, d) = x.dim();
    let mean = x.mean_axis(ndarray::Axis(0)).expect("rows");
    let c = x - &mean;
    let cov = c.t().dot(&c) / (n - ddof) as f64;
    let l = linalg::cholesky(&cov).ok_or_else(|| Error::Test("singular sample covariance".into()))?;
    if (0..d).any(|i| l[[i, i]] <= 1e-12 * cov[[i, i]].sqrt().max(1e-300)) {
        return Err(Error::Test("singular sample covariance".into()));
    }
    // Solve L·yᵀ = cᵀ row by row so that ‖y_i − y_j‖² is the Mahalanobis distance.
    let mut y = Array2::zeros((n, d));
    for i in 0..n {
        for a in 0..d {
            let mut s = c[[i, a]];
            for b in 0..a {
                s -= l[[a, b]] * y[[i, b]];
            }
            y[[i, a]] = s / l[[a, a]];
        }
    }
    Ok(y)
}

/// Sum over ordered pairs `i ≠ j` of `f(‖y_i − y_j‖²)`, reduced in a fixed order.
fn pair_sum(y: &Array2<f64>, f: impl Fn(f64) -> f64 + Sync) -> f64 {
    let (n, d) = y.dim();
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let yi = y.row(i);
            let mut s = 0.0;
            for j in (i + 1)..n {
                let yj = y.row(j);
                let mut d2 = 0.0;
                for a in 0..d {
                    let t = yi[a] - yj[a];
                    d2 += t * t;
                }
                s += f(d2);
            }
            s
        })
        .collect();
    2.0 * rows.iter().sum::<f64>()
}

/// Smoothing parameter `β = 2^{-1/2}·((2d+1)·n/4)^{1/(d+4)}`.
pub fn hz_beta(n: usize, d: usize) -> f64 {
    let (n, d) = (n as f64, d as f64);
    ((2.0 * d + 1.0) * n / 4.0).powf(1.0 / (d + 4.0)) / 2f64.sqrt()
}

/// Henze-Zirkler test with lognormal p-value.
pub fn hz_test<T: Real>(data: ArrayView2<T>) -> Result<MvnResult> {
    let x = to_f64(data)?;
    let (n, d) = x.dim();
    let y = whiten(&x, 0)?;
    let b = hz_beta(n, d);
    let b2 = b * b;
    let nf = n as f64;
    let df = d as f64;
    let pairs = pair_sum(&y, |d2| (-0.5 * b2 * d2).exp()) + nf;
    let single: f64 =
        y.rows().into_iter().map(|r| (-b2 / (2.0 * (1.0 + b2)) * r.iter().map(|v| v * v).sum::<f64>()).exp()).sum();
    let hz =
        nf * (pairs / (nf * nf) - 2.0 * (1.0 + b2).powf(-df / 2.0) * single / nf + (1.0 + 2.0 * b2).powf(-df / 2.0));

    let a = 1.0 + 2.0 * b2;
    let wb = (1.0 + b2) * (1.0 + 3.0 * b2);
    let b4 = b2 * b2;
    let b8 = b4 * b4;
    let mu = 1.0 - a.powf(-df / 2.0) * (1.0 + df * b2 / a + df * (df + 2.0) * b4 / (2.0 * a * a));
    let si2 = 2.0 * (1.0 + 4.0 * b2).powf(-df / 2.0)
        + 2.0 * a.powf(-df) * (1.0 + 2.0 * df * b4 / (a * a) + 3.0 * df * (df + 2.0) * b8 / (4.0 * a.powi(4)))
        - 4.0 * wb.powf(-df / 2.0) * (1.0 + 3.0 * df * b4 / (2.0 * wb) + df * (df + 2.0) * b8 / (2.0 * wb * wb));
    let pmu = (mu.powi(4) / (si2 + mu * mu)).sqrt().ln();
    let psi = ((si2 + mu * mu) / (mu * mu)).ln().sqrt();
    let p = if hz > 0.0 { 1.0 - phi((hz.ln() - pmu) / psi) } else { 1.0 };
    Ok(MvnResult { method: MvnMethod::HenzeZirkler, statistic: hz, p_value: p.clamp(0.0, 1.0), n, d })
}

/// `E‖Z − Z′‖ = 2·Γ((d+1)/2)/Γ(d/2)` for independent standard normals in `d` dimensions.
pub fn expected_normal_distance(d: usize) -> f64 {
    let d = d as f64;
    2.0 * (ln_gamma((d + 1.0) / 2.0) - ln_gamma(d / 2.0)).exp()
}

/// Gauss-Legendre nodes and weights on [-1, 1].
fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[m - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[m - 1 - i] = w[i];
    }
    (x, w)
}

const QUAD_NODES: usize = 96;

struct Quadrature {
    /// `tan²φ` at the nodes on (0, π/2).
    t2: Vec<f64>,
    /// Weights including `1/(√π·sin²φ)` and the interval Jacobian.
    w: Vec<f64>,
}

fn quadrature() -> &'static Quadrature {
    static Q: OnceLock<Quadrature> = OnceLock::new();
    Q.get_or_init(|| {
        let (x, w) = gauss_legendre(QUAD_NODES);
        let half = PI / 4.0;
        let mut t2 = Vec::with_capacity(QUAD_NODES);
        let mut ww = Vec::with_capacity(QUAD_NODES);
        for (xi, wi) in x.iter().zip(&w) {
            let phi = half * (xi + 1.0);
            t2.push(phi.tan().powi(2));
            ww.push(half * wi / (PI.sqrt() * phi.sin().powi(2)));
        }
        Quadrature { t2, w: ww }
    })
}

/// `E‖a − Z‖` for `‖a‖ = r`, `Z ~ N(0, I_d)`, by quadrature of
/// `π^{-1/2}∫₀^{π/2}[1 − (1+2t)^{-d/2}·exp(−r²t/(1+2t))]/sin²φ dφ`, `t = tan²φ`.
pub fn expected_distance_to_normal(r: f64, d: usize) -> f64 {
    let q = quadrature();
    let half_d = d as f64 / 2.0;
    let r2 = r * r;
    q.t2.iter()
        .zip(&q.w)
        .map(|(&t, &w)| {
            let a = 1.0 + 2.0 * t;
            w * (1.0 - a.powf(-half_d) * (-r2 * t / a).exp())
        })
        .sum()
}

fn energy_statistic(x: &Array2<f64>) -> Result<f64> {
    let (n, d) = x.dim();
    let y = whiten(x, 1)?;
    let nf = n as f64;
    let mean1 = y
        .rows()
        .into_iter()
        .map(|r| expected_distance_to_normal(r.iter().map(|v| v * v).sum::<f64>().sqrt(), d))
        .sum::<f64>()
        / nf;
    let mean3 = pair_sum(&y, f64::sqrt) / (nf * nf);
    Ok(nf * (2.0 * mean1 - expected_normal_distance(d) - mean3))
}

/// Parametric-bootstrap null distribution of the energy statistic, which
/// depends on `(n, d)` only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyNull {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub statistics: Vec<f64>,
}

impl EnergyNull {
    pub fn new(n: usize, d: usize, replicates: usize, seed: u64) -> Result<Self> {
        if replicates == 0 {
            return Err(Error::Test("at least one bootstrap replicate is required".into()));
        }
        let statistics = (0..replicates)
            .into_par_iter()
            .map(|b| {
                let mut rng = rng_from(derive_seed(seed, b as u64));
                let z = Array2::from_shape_simple_fn((n, d), || rng.sample::<f64, _>(StandardNormal));
                energy_statistic(&z)
            })
            .collect::<Result<_>>()?;
        Ok(Self { n, d, seed, statistics })
    }

    /// Shared instance per `(n, d, replicates, seed)`.
    pub fn cached(n: usize, d: usize, replicates: usize, seed: u64) -> Result<Arc<Self>> {
        type Cache = Mutex<HashMap<(usize, usize, usize, u64), Arc<EnergyNull>>>;
        static CACHE: OnceLock<Cache> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        let key = (n, d, replicates, seed);
        if let Some(v) = cache.lock().expect("cache lock").get(&key) {
            return Ok(v.clone());
        }
        let null = Arc::new(Self::new(n, d, replicates, seed)?);
        cache.lock().expect("cache lock").insert(key, null.clone());
        Ok(null)
    }

    pub fn replicates(&self) -> usize {
        self.statistics.len()
    }

    /// `(1 + #{T* ≥ t}) / (R + 1)`.
    pub fn p_value(&self, t: f64) -> f64 {
        let exceed = self.statistics.iter().filter(|&&s| s >= t).count();
        (1 + exceed) as f64 / (self.replicates() + 1) as f64
    }
}

/// Energy test against a precomputed null.
pub fn energy_test_with_null<T: Real>(data: ArrayView2<T>, null: &EnergyNull) -> Result<MvnResult> {
    let x = to_f64(data)?;
    let (n, d) = x.dim();
    if (n, d) != (null.n, null.d) {
        return Err(Error::Test(format!("null built for n={}, d={}; data is n={n}, d={d}", null.n, null.d)));
    }
    let t = energy_statistic(&x)?;
    Ok(MvnResult { method: MvnMethod::Energy, statistic: t, p_value: null.p_value(t), n, d })
}

/// Energy test with a parametric-bootstrap p-value.
pub fn energy_test<T: Real>(data: ArrayView2<T>, replicates: usize, seed: u64) -> Result<MvnResult> {
    let (n, d) = data.dim();
    to_f64(data)?;
    let null = EnergyNull::cached(n, d, replicates, seed)?;
    energy_test_with_null(data, &null)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;

    fn normal(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = rng_from(seed);
        Array2::from_shape_simple_fn((n, d), || rng.sample(StandardNormal))
    }

    fn bimodal(n: usize, seed: u64) -> Array2<f64> {
        let mut rng = rng_from(seed);
        Array2::from_shape_fn((n, 2), |(i, j)| {
            let z: f64 = rng.sample(StandardNormal);
            if j == 0 {
                z * 0.4 + if i % 2 == 0 { 2.0 } else { -2.0 }
            } else {
                z
            }
        })
    }

    #[test]
    fn beta_closed_form() {
        assert!((hz_beta(100, 2) - (5f64 / 2.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn normal_distance_closed_form() {
        assert!((expected_normal_distance(2) - PI.sqrt()).abs() < 1e-12);
        assert!((expected_normal_distance(1) - 2.0 / PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn quadrature_matches_one_dimensional_closed_form() {
        for &a in &[0.0, 0.3, 1.0, 2.5, 5.0, 9.0] {
            let exact = 2.0 * (-a * a / 2.0f64).exp() / (2.0 * PI).sqrt() + a * (2.0 * phi(a) - 1.0);
            let q = expected_distance_to_normal(a, 1);
            assert!((q - exact).abs() < 1e-9, "a={a}: {q} vs {exact}");
        }
        assert!((expected_distance_to_normal(0.0, 2) - (PI / 2.0).sqrt()).abs() < 1e-9);
        // Large r: E‖a − Z‖ ≈ r + (d−1)/(2r).
        let r = 40.0;
        assert!((expected_distance_to_normal(r, 3) - (r + 1.0 / r)).abs() < 1e-3);
    }

    #[test]
    fn hz_accepts_normal_rejects_bimodal() {
        assert!(hz_test(normal(400, 2, 1).view()).unwrap().p_value > 0.05);
        let r = hz_test(bimodal(1000, 2).view()).unwrap();
        assert!(r.p_value < 0.05, "{r:?}");
    }

    #[test]
    fn hz_is_affine_invariant() {
        let x = bimodal(300, 3);
        let a = ndarray::array![[2.0, 0.5], [-1.0, 3.0]];
        let y = x.dot(&a) + 7.0;
        let (r1, r2) = (hz_test(x.view()).unwrap(), hz_test(y.view()).unwrap());
        assert!((r1.statistic - r2.statistic).abs() < 1e-9 * r1.statistic.abs().max(1.0));
    }

    #[test]
    fn energy_accepts_normal_rejects_bimodal() {
        let r = energy_test(normal(200, 2, 7).view(), 99, 1).unwrap();
        assert!(r.p_value > 0.05 && r.p_value <= 1.0);
        let r = energy_test(bimodal(200, 5).view(), 99, 1).unwrap();
        assert!(r.p_value < 0.05, "{r:?}");
    }

    #[test]
    fn energy_deterministic_and_invariant() {
        let x = normal(150, 3, 6);
        let a = energy_test(x.view(), 49, 9).unwrap();
        let b = energy_test(x.view(), 49, 9).unwrap();
        assert_eq!(a, b);
        let y = x.mapv(|v| 3.0 * v - 1.0);
        let c = energy_test(y.view(), 49, 9).unwrap();
        assert!((a.statistic - c.statistic).abs() < 1e-9);
    }

    #[test]
    fn singular_and_small_inputs_error() {
        let x = Array2::from_shape_fn((50, 2), |(i, _)| i as f64);
        assert!(hz_test(x.view()).is_err());
        assert!(energy_test(x.view(), 19, 0).is_err());
        assert!(hz_test(Array2::<f64>::zeros((2, 2)).view()).is_err());
    }
}
