//! Synthetic bivariate cases with an inequality constraint, a non-linear
//! relationship or heteroscedasticity, built on spatially correlated latents.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from};
use crate::sampledata::SampleTable;
use crate::scalar::Real;
use crate::simulate::{turning_bands_at_points, TbParams};
use crate::spatial::VariogramModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    Inequality,
    Nonlinear,
    Heteroscedastic,
}

impl SynthKind {
    pub const ALL: [SynthKind; 3] = [SynthKind::Inequality, SynthKind::Nonlinear, SynthKind::Heteroscedastic];

    pub fn name(self) -> &'static str {
        match self {
            SynthKind::Inequality => "inequality",
            SynthKind::Nonlinear => "nonlinear",
            SynthKind::Heteroscedastic => "heteroscedastic",
        }
    }

    /// Column names; for the inequality kind `v1` is the total and `v2` the
    /// bounded fraction.
    pub fn variable_names(self) -> [&'static str; 2] {
        ["v1", "v2"]
    }
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown synthetic kind `{s}`")))
    }
}

/// Location, latent field and mapping parameters of a synthetic case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub n: usize,
    /// Domain size from the origin; a zero extent collapses that axis.
    pub extent: [f64; 3],
    pub model: VariogramModel<f64>,
    pub seed: u64,
    pub tb: TbParams,
}

impl SynthSpec {
    pub fn new(kind: SynthKind, n: usize, seed: u64) -> Self {
        Self {
            kind,
            n,
            extent: [1000.0, 1000.0, 0.0],
            model: VariogramModel {
                nugget: 0.05,
                structures: vec![crate::spatial::Spherical { sill: 0.95, range_h: 200.0, range_v: 200.0 }],
            },
            seed,
            tb: TbParams { standardize: false, ..TbParams::default() },
        }
    }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Shifted Halton points in the box `[0, extent]`.
pub fn quasi_random_locations(n: usize, extent: [f64; 3], seed: u64) -> Vec<[f64; 3]> {
    let mut rng = rng_from(seed);
    let shift: [f64; 3] = std::array::from_fn(|_| rng.random::<f64>());
    let bases = [2, 3, 5];
    (0..n)
        .map(|i| std::array::from_fn(|a| ((radical_inverse(i as u64 + 1, bases[a]) + shift[a]) % 1.0) * extent[a]))
        .collect()
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Maps two standard Gaussian latents to the bivariate relationship of `kind`.
pub fn synth_map(kind: SynthKind, z1: f64, z2: f64) -> [f64; 2] {
    match kind {
        SynthKind::Inequality => {
            let total = (0.8 * z1).exp();
            [total, total * logistic(-0.5 + 1.2 * z2 + 0.6 * z1)]
        }
        SynthKind::Nonlinear => {
            let v1 = (0.5 * z1).exp();
            [v1, 3.0 - v1 * v1 + 0.4 * z2]
        }
        SynthKind::Heteroscedastic => {
            let v1 = (0.9 * z1).exp();
            [v1, 0.8 * v1 * (0.7 * z2).exp()]
        }
    }
}

/// Generates a synthetic sample table.
pub fn synth_case<T: Real>(spec: &SynthSpec) -> Result<SampleTable<T>> {
    if spec.n < 100 {
        return Err(Error::InvalidInput(format!("synthetic cases need n ≥ 100, got {}", spec.n)));
    }
    if spec.extent.iter().any(|e| !(*e >= 0.0)) || spec.extent[0] <= 0.0 {
        return Err(Error::InvalidInput("extent must be nonnegative with a positive x extent".into()));
    }
    let pts = quasi_random_locations(spec.n, spec.extent, derive_seed(spec.seed, 0));
    let z1: Vec<f64> = turning_bands_at_points(&spec.model, &pts, &spec.tb, derive_seed(spec.seed, 1))?;
    let z2: Vec<f64> = turning_bands_at_points(&spec.model, &pts, &spec.tb, derive_seed(spec.seed, 2))?;
    let scale = spec.model.total_sill().sqrt();
    let mut values = Array2::<T>::zeros((spec.n, 2));
    for i in 0..spec.n {
        let v = synth_map(spec.kind, z1[i] / scale, z2[i] / scale);
        values[[i, 0]] = T::lit(v[0]);
        values[[i, 1]] = T::lit(v[1]);
    }
    let coords = Array2::from_shape_fn((spec.n, 3), |(i, a)| T::lit(pts[i][a]));
    let names = spec.kind.variable_names().iter().map(|s| s.to_string()).collect();
    SampleTable::new(coords, values, names)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{pearson, spearman};

    fn quick(kind: SynthKind, n: usize, seed: u64) -> SynthSpec {
        SynthSpec { tb: TbParams { lines: 100, harmonics: 30, standardize: false }, ..SynthSpec::new(kind, n, seed) }
    }

    #[test]
    fn inequality_holds() {
        let t: SampleTable<f64> = synth_case(&quick(SynthKind::Inequality, 1000, 1)).unwrap();
        let v = t.values();
        assert!(v.rows().into_iter().all(|r| r[1] <= r[0] && r[1] >= 0.0));
    }

    #[test]
    fn correlation_targets() {
        let t: SampleTable<f64> = synth_case(&quick(SynthKind::Nonlinear, 4000, 2)).unwrap();
        let rs = spearman(&t.column(0), &t.column(1)).unwrap();
        assert!((-0.95..=-0.80).contains(&rs), "{rs}");
        let t: SampleTable<f64> = synth_case(&quick(SynthKind::Heteroscedastic, 4000, 3)).unwrap();
        let r = pearson(&t.column(0), &t.column(1)).unwrap();
        assert!((0.55..=0.80).contains(&r), "{r}");
    }

    #[test]
    fn reproducible_and_kind_parsing() {
        let a: SampleTable<f64> = synth_case(&quick(SynthKind::Nonlinear, 200, 4)).unwrap();
        let b: SampleTable<f64> = synth_case(&quick(SynthKind::Nonlinear, 200, 4)).unwrap();
        assert_eq!(a, b);
        assert_eq!("heteroscedastic".parse::<SynthKind>().unwrap(), SynthKind::Heteroscedastic);
        assert!("other".parse::<SynthKind>().is_err());
        assert!(synth_case::<f64>(&quick(SynthKind::Nonlinear, 50, 4)).is_err());
    }

    #[test]
    fn locations_inside_extent() {
        let p = quasi_random_locations(500, [10.0, 20.0, 0.0], 3);
        assert!(p.iter().all(|q| (0.0..10.0).contains(&q[0]) && (0.0..20.0).contains(&q[1]) && q[2] == 0.0));
    }
}
