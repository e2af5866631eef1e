//! Conditional simulation: unconditional turning bands plus kriged residuals.

use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::derive_path;
use crate::scalar::Real;
use crate::spatial::VariogramModel;

use super::grid::GridSpec;
use super::kriging::{kriging_weights, points_of, NeighborhoodSpec, Searcher};
use super::spectral::{SpectralField, TbParams, DEFAULT_HARMONICS, DEFAULT_LINES};

/// Simulation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimParams {
    pub realizations: usize,
    pub lines: usize,
    pub harmonics: usize,
    pub seed: u64,
    /// Per-realization rescaling of the unconditional field.
    pub standardize: bool,
}

impl Default for SimParams {
    fn default() -> Self {
        Self { realizations: 50, lines: DEFAULT_LINES, harmonics: DEFAULT_HARMONICS, seed: 0, standardize: false }
    }
}

impl SimParams {
    pub fn tb(&self) -> TbParams {
        TbParams { lines: self.lines, harmonics: self.harmonics, standardize: self.standardize }
    }
}

/// Seed of realization `r` of variable `var`.
pub fn realization_seed(base: u64, var: usize, r: usize) -> u64 {
    derive_path(base, &[var as u64, r as u64])
}

/// Simulated fields: `fields[r]` is nodes × variables for realization `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RealizationSet<T: Real> {
    pub grid: GridSpec,
    pub names: Vec<String>,
    pub base_seed: u64,
    pub fields: Vec<Array2<T>>,
}

impl<T: Real> RealizationSet<T> {
    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn seed_of(&self, var: usize, r: usize) -> u64 {
        realization_seed(self.base_seed, var, r)
    }

    /// Writes realization `r` as `node,x,y,z,<names>` rows.
    pub fn write_csv(&self, r: usize, path: &Path) -> Result<()> {
        let f = self.fields.get(r).ok_or_else(|| Error::InvalidInput(format!("no realization {r}")))?;
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        write!(w, "node,x,y,z")?;
        for n in &self.names {
            write!(w, ",{n}")?;
        }
        writeln!(w)?;
        for (node, row) in f.rows().into_iter().enumerate() {
            let c = self.grid.coord(node);
            write!(w, "{node},{},{},{}", c[0], c[1], c[2])?;
            for v in row {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes every realization into `dir` as `realization_NNNN.csv`.
    pub fn write_all(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        (0..self.len())
            .map(|r| {
                let p = dir.join(format!("realization_{r:04}.csv"));
                self.write_csv(r, &p).map(|_| p)
            })
            .collect()
    }
}

/// Per-node kriging plan for one variable.
struct Plan {
    offsets: Vec<usize>,
    index: Vec<usize>,
    weight: Vec<f64>,
}

fn snapped_nodes(grid: &GridSpec, points: &[[f64; 3]]) -> Vec<Option<usize>> {
    let mut best: Vec<Option<(f64, usize)>> = vec![None; grid.len()];
    for (i, p) in points.iter().enumerate() {
        if let Some(node) = grid.node_containing(*p) {
            let c = grid.coord(node);
            let d2 = (0..3).map(|a| (p[a] - c[a]).powi(2)).sum::<f64>();
            let b = &mut best[node];
            if b.is_none_or(|(bd, _)| d2 < bd) {
                *b = Some((d2, i));
            }
        }
    }
    best.into_iter().map(|b| b.map(|(_, i)| i)).collect()
}

fn plan<T: Real>(
    model: &VariogramModel<T>,
    grid: &GridSpec,
    points: &[[f64; 3]],
    neighbors: &[Vec<usize>],
) -> Result<Plan> {
    let weights: Vec<Vec<f64>> = neighbors
        .par_iter()
        .enumerate()
        .map(|(node, nb)| {
            if nb.is_empty() {
                return Ok(Vec::new());
            }
            let pts: Vec<[f64; 3]> = nb.iter().map(|&i| points[i]).collect();
            kriging_weights(model, &pts, grid.coord(node))
        })
        .collect::<Result<_>>()?;
    let mut offsets = Vec::with_capacity(grid.len() + 1);
    offsets.push(0);
    let (mut index, mut weight) = (Vec::new(), Vec::new());
    for (nb, w) in neighbors.iter().zip(weights) {
        index.extend_from_slice(nb);
        weight.extend(w);
        offsets.push(index.len());
    }
    Ok(Plan { offsets, index, weight })
}

/// Conditional simulation of independent Gaussian factors, one variogram
/// model per column of `values` (n×d) at `coords` (n×3).
pub fn simulate_conditional<T: Real>(
    models: &[VariogramModel<T>],
    grid: &GridSpec,
    coords: ArrayView2<T>,
    values: ArrayView2<T>,
    names: &[String],
    spec: &NeighborhoodSpec,
    params: &SimParams,
) -> Result<RealizationSet<T>> {
    grid.validate()?;
    spec.validate()?;
    params.tb().validate()?;
    let d = models.len();
    if d == 0 {
        return Err(Error::InvalidInput("at least one variogram model is required".into()));
    }
    if values.ncols() != d || names.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: values.ncols().min(names.len()) });
    }
    if coords.nrows() != values.nrows() || coords.ncols() != 3 {
        return Err(Error::InvalidInput("coordinates must be n×3 matching the values".into()));
    }
    if params.realizations == 0 {
        return Err(Error::InvalidInput("at least one realization is required".into()));
    }
    for m in models {
        m.validate()?;
    }
    let points = points_of(coords);
    let data: Vec<Vec<f64>> = (0..d).map(|v| values.column(v).iter().map(|x| x.as_f64()).collect()).collect();
    let neighbors: Vec<Vec<usize>> = (0..grid.len())
        .into_par_iter()
        .map_init(|| Searcher::new(&points, *spec), |s, node| s.search(grid.coord(node)))
        .collect();
    let snapped = snapped_nodes(grid, &points);
    let plans: Vec<Plan> = models.iter().map(|m| plan(m, grid, &points, &neighbors)).collect::<Result<_>>()?;
    let tb = params.tb();

    let jobs: Vec<(usize, usize)> = (0..params.realizations).flat_map(|r| (0..d).map(move |v| (r, v))).collect();
    let columns: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(r, v)| {
            let field = SpectralField::new(&models[v], &tb, realization_seed(params.seed, v, r))?;
            let (mut g, p) = field.evaluate(grid, &points)?;
            let resid: Vec<f64> = data[v].iter().zip(&p).map(|(y, u)| y - u).collect();
            let pl = &plans[v];
            for (node, out) in g.iter_mut().enumerate() {
                if let Some(i) = snapped[node] {
                    *out = data[v][i];
                    continue;
                }
                let (a, b) = (pl.offsets[node], pl.offsets[node + 1]);
                let k: f64 = pl.index[a..b].iter().zip(&pl.weight[a..b]).map(|(&i, w)| w * resid[i]).sum();
                *out += k;
            }
            Ok(g)
        })
        .collect::<Result<_>>()?;

    let fields = (0..params.realizations)
        .map(|r| Array2::from_shape_fn((grid.len(), d), |(node, v)| T::lit(columns[r * d + v][node])))
        .collect();
    Ok(RealizationSet { grid: *grid, names: names.to_vec(), base_seed: params.seed, fields })
}
