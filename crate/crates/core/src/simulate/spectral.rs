//! Random-cosine turning bands for nested spherical models.

use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_path, derive_seed, rng_from, Rng};
use crate::scalar::Real;
use crate::spatial::VariogramModel;

use super::grid::GridSpec;

pub const DEFAULT_LINES: usize = 1000;
pub const DEFAULT_HARMONICS: usize = 100;
pub const MIN_LINES: usize = 100;

const NUGGET_STREAM: u64 = 0;
const GRID_STREAM: u64 = 0;
const POINT_STREAM: u64 = 1;

/// Turning-bands parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TbParams {
    pub lines: usize,
    pub harmonics: usize,
    /// Rescale each field to mean 0 and variance equal to the total sill.
    pub standardize: bool,
}

impl Default for TbParams {
    fn default() -> Self {
        Self { lines: DEFAULT_LINES, harmonics: DEFAULT_HARMONICS, standardize: true }
    }
}

impl TbParams {
    pub fn validate(&self) -> Result<()> {
        if self.lines < MIN_LINES {
            return Err(Error::InvalidInput(format!("at least {MIN_LINES} lines required, got {}", self.lines)));
        }
        if self.harmonics == 0 {
            return Err(Error::InvalidInput("at least one harmonic required".into()));
        }
        Ok(())
    }
}

/// `L` quasi-uniform unit vectors on the sphere (Fibonacci spiral).
pub fn fibonacci_directions(lines: usize) -> Vec<[f64; 3]> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..lines)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / lines as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let a = golden * i as f64;
            [r * a.cos(), r * a.sin(), z]
        })
        .collect()
}

/// Uniformly distributed random rotation (unit quaternion from four normals).
fn random_rotation(rng: &mut Rng) -> [[f64; 3]; 3] {
    let mut q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n == 0.0 {
        q = [1.0, 0.0, 0.0, 0.0];
    } else {
        q.iter_mut().for_each(|v| *v /= n);
    }
    let [w, x, y, z] = q;
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

/// Radial density of the spherical-model spectrum in `u = ω·a/2`:
/// `p(u) ∝ (sin u − u cos u)² / u⁴`.
pub(crate) fn radial_density(u: f64) -> f64 {
    if u < 1e-3 {
        return u * u / 9.0;
    }
    let v = u.sin() - u * u.cos();
    v * v / (u * u * u * u)
}

const TABLE_END: f64 = 200.0;
const TABLE_STEP: f64 = 0.005;

/// Cumulative table of the radial density on `[0, TABLE_END]`, normalized
/// together with a `1/(2u²)` tail beyond it.
struct RadialTable {
    cdf: Vec<f64>,
    body_mass: f64,
}

fn radial_table() -> &'static RadialTable {
    static TABLE: OnceLock<RadialTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let m = (TABLE_END / TABLE_STEP) as usize;
        let mut cdf = Vec::with_capacity(m + 1);
        cdf.push(0.0);
        let mut acc = 0.0;
        let mut prev = radial_density(0.0);
        for i in 1..=m {
            // Simpson on each cell.
            let a = (i - 1) as f64 * TABLE_STEP;
            let mid = radial_density(a + 0.5 * TABLE_STEP);
            let next = radial_density(i as f64 * TABLE_STEP);
            acc += TABLE_STEP / 6.0 * (prev + 4.0 * mid + next);
            cdf.push(acc);
            prev = next;
        }
        let total = acc + 0.5 / TABLE_END;
        cdf.iter_mut().for_each(|c| *c /= total);
        RadialTable { body_mass: acc / total, cdf }
    })
}

/// Draws `u` from the radial density by table inversion plus a Pareto tail.
pub(crate) fn sample_radial(v: f64) -> f64 {
    let t = radial_table();
    if v >= t.body_mass {
        let tail = (v - t.body_mass) / (1.0 - t.body_mass);
        return TABLE_END / (1.0 - tail).max(1e-300);
    }
    let k = t.cdf.partition_point(|&c| c <= v).clamp(1, t.cdf.len() - 1);
    let (c0, c1) = (t.cdf[k - 1], t.cdf[k]);
    let frac = if c1 > c0 { (v - c0) / (c1 - c0) } else { 0.0 };
    ((k - 1) as f64 + frac) * TABLE_STEP
}

/// Branch-free cosine accurate to about 1e-12 for moderate arguments.
#[inline(always)]
pub(crate) fn fast_cos(x: f64) -> f64 {
    const MAGIC: f64 = 6_755_399_441_055_744.0;
    const C1: f64 = TAU;
    const C2: f64 = 2.449_293_598_294_706_4e-16;
    let q = (x * (1.0 / TAU) + MAGIC) - MAGIC;
    let r = (x - q * C1) - q * C2;
    let r2 = r * r;
    const K: [f64; 12] = [
        1.0,
        -1.0 / 2.0,
        1.0 / 24.0,
        -1.0 / 720.0,
        1.0 / 40_320.0,
        -1.0 / 3_628_800.0,
        1.0 / 479_001_600.0,
        -1.0 / 87_178_291_200.0,
        1.0 / 20_922_789_888_000.0,
        -1.0 / 6_402_373_705_728_000.0,
        1.0 / 2_432_902_008_176_640_000.0,
        -1.0 / 1_124_000_727_777_607_680_000.0,
    ];
    let mut p = K[11];
    for &k in K[..11].iter().rev() {
        p = p * r2 + k;
    }
    p
}

/// One spherical structure realized as `L·H` random cosines.
struct Structure {
    /// Line directions pre-scaled by the inverse ranges.
    dirs: Vec<[f64; 3]>,
    omega: Vec<f64>,
    phase: Vec<f64>,
    harmonics: usize,
    amp: f64,
}

impl Structure {
    fn new(sill: f64, range_h: f64, range_v: f64, params: &TbParams, seed: u64) -> Self {
        let mut rng = rng_from(seed);
        let rot = random_rotation(&mut rng);
        let scale = [1.0 / range_h, 1.0 / range_h, 1.0 / range_v];
        let dirs = fibonacci_directions(params.lines)
            .into_iter()
            .map(|u| std::array::from_fn(|a| scale[a] * (rot[a][0] * u[0] + rot[a][1] * u[1] + rot[a][2] * u[2])))
            .collect();
        let m = params.lines * params.harmonics;
        let mut omega = Vec::with_capacity(m);
        let mut phase = Vec::with_capacity(m);
        for _ in 0..m {
            // Unit-range ball diameter: ω = 2u.
            omega.push(2.0 * sample_radial(rng.random::<f64>()));
            phase.push(TAU * rng.random::<f64>());
        }
        Self { dirs, omega, phase, harmonics: params.harmonics, amp: (2.0 * sill / m as f64).sqrt() }
    }

    fn add_to_grid(&self, grid: &GridSpec, out: &mut [f64]) {
        let h = self.harmonics;
        let [nx, ny, nz] = grid.counts;
        let (mut c, mut s, mut cd, mut sd) = (vec![0.0; h], vec![0.0; h], vec![0.0; h], vec![0.0; h]);
        for (l, e) in self.dirs.iter().enumerate() {
            let w = &self.omega[l * h..(l + 1) * h];
            let ph = &self.phase[l * h..(l + 1) * h];
            let dx = e[0] * grid.cell[0];
            for q in 0..h {
                let (sn, cs) = (w[q] * dx).sin_cos();
                cd[q] = cs;
                sd[q] = sn;
            }
            for k in 0..nz {
                for j in 0..ny {
                    let p0 = [
                        grid.origin[0],
                        grid.origin[1] + j as f64 * grid.cell[1],
                        grid.origin[2] + k as f64 * grid.cell[2],
                    ];
                    let s0 = e[0] * p0[0] + e[1] * p0[1] + e[2] * p0[2];
                    for q in 0..h {
                        let (sn, cs) = (w[q] * s0 + ph[q]).sin_cos();
                        c[q] = cs;
                        s[q] = sn;
                    }
                    let start = grid.index(0, j, k);
                    for r in out[start..start + nx].iter_mut() {
                        let mut lanes = [0.0; 4];
                        for (((cq, sq), cdq), sdq) in
                            c.chunks_mut(4).zip(s.chunks_mut(4)).zip(cd.chunks(4)).zip(sd.chunks(4))
                        {
                            for t in 0..cq.len() {
                                lanes[t] += cq[t];
                                let cn = cq[t] * cdq[t] - sq[t] * sdq[t];
                                sq[t] = sq[t] * cdq[t] + cq[t] * sdq[t];
                                cq[t] = cn;
                            }
                        }
                        *r += self.amp * ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3]));
                    }
                }
            }
        }
    }

    fn add_to_points(&self, points: &[[f64; 3]], out: &mut [f64]) {
        const BLOCK: usize = 8;
        let h = self.harmonics;
        for (pc, oc) in points.chunks(BLOCK).zip(out.chunks_mut(BLOCK)) {
            let last = pc.len() - 1;
            let mut total = [0.0; BLOCK];
            for (l, e) in self.dirs.iter().enumerate() {
                let s: [f64; BLOCK] = std::array::from_fn(|t| {
                    let p = pc[t.min(last)];
                    e[0] * p[0] + e[1] * p[1] + e[2] * p[2]
                });
                let w = &self.omega[l * h..(l + 1) * h];
                let ph = &self.phase[l * h..(l + 1) * h];
                let mut line = [0.0; BLOCK];
                for (&wq, &pq) in w.iter().zip(ph) {
                    for t in 0..BLOCK {
                        line[t] += fast_cos(wq * s[t] + pq);
                    }
                }
                for t in 0..BLOCK {
                    total[t] += line[t];
                }
            }
            for (o, t) in oc.iter_mut().zip(total) {
                *o += self.amp * t;
            }
        }
    }
}

/// A seeded Gaussian random function with a nested spherical covariance,
/// evaluable on grids and at scattered points consistently.
pub struct SpectralField {
    structures: Vec<Structure>,
    nugget: f64,
    total: f64,
    standardize: bool,
    seed: u64,
}

impl SpectralField {
    pub fn new<T: Real>(model: &VariogramModel<T>, params: &TbParams, seed: u64) -> Result<Self> {
        params.validate()?;
        model.validate()?;
        let structures = model
            .structures
            .iter()
            .enumerate()
            .map(|(i, s)| {
                Structure::new(
                    s.sill.as_f64(),
                    s.range_h.as_f64(),
                    s.range_v.as_f64(),
                    params,
                    derive_seed(seed, i as u64 + 1),
                )
            })
            .collect();
        Ok(Self {
            structures,
            nugget: model.nugget.as_f64(),
            total: model.total_sill().as_f64(),
            standardize: params.standardize,
            seed,
        })
    }

    fn add_nugget(&self, stream: u64, out: &mut [f64]) {
        if self.nugget > 0.0 {
            let mut rng = rng_from(derive_path(self.seed, &[NUGGET_STREAM, stream]));
            let sd = self.nugget.sqrt();
            for v in out.iter_mut() {
                *v += sd * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }

    fn raw_grid(&self, grid: &GridSpec) -> Vec<f64> {
        let mut out = vec![0.0; grid.len()];
        for s in &self.structures {
            s.add_to_grid(grid, &mut out);
        }
        self.add_nugget(GRID_STREAM, &mut out);
        out
    }

    fn raw_points(&self, points: &[[f64; 3]]) -> Vec<f64> {
        let mut out = vec![0.0; points.len()];
        for s in &self.structures {
            s.add_to_points(points, &mut out);
        }
        self.add_nugget(POINT_STREAM, &mut out);
        out
    }

    /// Field values at grid nodes and at `points`; when standardizing, both
    /// share the affine map fitted on the grid values.
    pub fn evaluate(&self, grid: &GridSpec, points: &[[f64; 3]]) -> Result<(Vec<f64>, Vec<f64>)> {
        grid.validate()?;
        let mut g = self.raw_grid(grid);
        let mut p = self.raw_points(points);
        if self.standardize {
            let n = g.len() as f64;
            let mean = g.iter().sum::<f64>() / n;
            let var = g.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            if var > 0.0 {
                let f = (self.total / var).sqrt();
                g.iter_mut().chain(p.iter_mut()).for_each(|v| *v = (*v - mean) * f);
            }
        }
        Ok((g, p))
    }
}

/// Unconditional field on `grid` (nodes in grid order).
pub fn turning_bands_unconditional<T: Real>(
    model: &VariogramModel<T>,
    grid: &GridSpec,
    params: &TbParams,
    seed: u64,
) -> Result<Vec<T>> {
    let (g, _) = SpectralField::new(model, params, seed)?.evaluate(grid, &[])?;
    Ok(g.into_iter().map(T::lit).collect())
}

/// Unconditional field at scattered points.
pub fn turning_bands_at_points<T: Real>(
    model: &VariogramModel<T>,
    points: &[[f64; 3]],
    params: &TbParams,
    seed: u64,
) -> Result<Vec<T>> {
    let field = SpectralField::new(model, &TbParams { standardize: false, ..*params }, seed)?;
    Ok(field.raw_points(points).into_iter().map(T::lit).collect())
}
