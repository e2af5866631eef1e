//! Spatial sample tables: loading, cell declustering and weighted
//! descriptive statistics.

use std::collections::HashMap;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::stats;

/// Hard data: coordinates (n×3, metres), variables (n×d) and declustering
/// weights rescaled to mean 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SampleTable<T: Real> {
    coords: Array2<T>,
    values: Array2<T>,
    weights: Array1<T>,
    names: Vec<String>,
}

impl<T: Real> SampleTable<T> {
    /// Builds a table with unit weights.
    pub fn new(coords: Array2<T>, values: Array2<T>, names: Vec<String>) -> Result<Self> {
        let n = values.nrows();
        Self::with_weights(coords, values, Array1::from_elem(n, T::one()), names)
    }

    /// Builds a table; weights are rescaled to mean 1.
    pub fn with_weights(coords: Array2<T>, values: Array2<T>, weights: Array1<T>, names: Vec<String>) -> Result<Self> {
        let n = values.nrows();
        if n == 0 {
            return Err(Error::EmptyData);
        }
        if values.ncols() == 0 {
            return Err(Error::InvalidInput("at least one variable is required".into()));
        }
        if coords.nrows() != n || coords.ncols() != 3 {
            return Err(Error::InvalidInput(format!(
                "coordinates must be {n}x3, got {}x{}",
                coords.nrows(),
                coords.ncols()
            )));
        }
        if weights.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: weights.len() });
        }
        if names.len() != values.ncols() {
            return Err(Error::DimensionMismatch { expected: values.ncols(), found: names.len() });
        }
        if coords.iter().chain(values.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite coordinate or value".into()));
        }
        if weights.iter().any(|&w| !(w > T::zero()) || !w.is_finite()) {
            return Err(Error::InvalidInput("weights must be positive and finite".into()));
        }
        let mean = weights.sum() / T::of_usize(n);
        let weights = weights.mapv(|w| w / mean);
        Ok(Self { coords, values, weights, names })
    }

    /// Same coordinates and weights, new variables.
    pub fn with_values(&self, values: Array2<T>, names: Vec<String>) -> Result<Self> {
        Self::with_weights(self.coords.clone(), values, self.weights.clone(), names)
    }

    /// Same data, new weights (rescaled to mean 1).
    pub fn reweighted(&self, weights: Array1<T>) -> Result<Self> {
        Self::with_weights(self.coords.clone(), self.values.clone(), weights, self.names.clone())
    }

    pub fn coords(&self) -> ArrayView2<'_, T> {
        self.coords.view()
    }

    pub fn values(&self) -> ArrayView2<'_, T> {
        self.values.view()
    }

    pub fn weights(&self) -> ArrayView1<'_, T> {
        self.weights.view()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn coord(&self, i: usize) -> [T; 3] {
        [self.coords[[i, 0]], self.coords[[i, 1]], self.coords[[i, 2]]]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        self.values.column(j).to_vec()
    }
}

/// Maps file columns to roles. A missing `z` means 2-D data (z = 0).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub x: String,
    pub y: String,
    #[serde(default)]
    pub z: Option<String>,
    pub variables: Vec<String>,
    #[serde(default)]
    pub weight: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadReport {
    pub rows_read: usize,
    pub dropped: usize,
}

/// Reads a delimited text file with a header row. Rows with any blank or
/// non-finite mapped value are dropped and counted.
pub fn load_samples<T: Real>(
    path: impl AsRef<Path>,
    map: &ColumnMap,
    delimiter: u8,
) -> Result<(SampleTable<T>, LoadReport)> {
    let mut reader = csv::ReaderBuilder::new().delimiter(delimiter).has_headers(true).from_path(path.as_ref())?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h.trim() == name).ok_or_else(|| Error::Config(format!("missing column `{name}`")))
    };
    let ix = find(&map.x)?;
    let iy = find(&map.y)?;
    let iz = map.z.as_deref().map(find).transpose()?;
    let ivars = map.variables.iter().map(|v| find(v)).collect::<Result<Vec<_>>>()?;
    let iw = map.weight.as_deref().map(find).transpose()?;
    if ivars.is_empty() {
        return Err(Error::Config("no variable columns mapped".into()));
    }

    let parse = |field: Option<&str>| -> Option<T> {
        let v: f64 = field?.trim().parse().ok()?;
        v.is_finite().then(|| T::lit(v))
    };

    let mut coords = Vec::new();
    let mut values = Vec::new();
    let mut weights = Vec::new();
    let mut rows_read = 0;
    let mut dropped = 0;
    for record in reader.records() {
        let record = record?;
        rows_read += 1;
        let x = parse(record.get(ix));
        let y = parse(record.get(iy));
        let z = match iz {
            Some(i) => parse(record.get(i)),
            None => Some(T::zero()),
        };
        let vals: Option<Vec<T>> = ivars.iter().map(|&i| parse(record.get(i))).collect();
        let w = match iw {
            Some(i) => parse(record.get(i)).filter(|&w| w > T::zero()),
            None => Some(T::one()),
        };
        match (x, y, z, vals, w) {
            (Some(x), Some(y), Some(z), Some(vals), Some(w)) => {
                coords.extend_from_slice(&[x, y, z]);
                values.extend(vals);
                weights.push(w);
            }
            _ => dropped += 1,
        }
    }
    let n = weights.len();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    let d = ivars.len();
    let table = SampleTable::with_weights(
        Array2::from_shape_vec((n, 3), coords).expect("shape"),
        Array2::from_shape_vec((n, d), values).expect("shape"),
        Array1::from(weights),
        map.variables.clone(),
    )?;
    Ok((table, LoadReport { rows_read, dropped }))
}

/// Writes `x,y,z,<variables>,weight` with a header row.
pub fn write_samples<T: Real>(table: &SampleTable<T>, path: impl AsRef<Path>, delimiter: u8) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_path(path.as_ref())?;
    let mut header = vec!["x".to_string(), "y".to_string(), "z".to_string()];
    header.extend(table.names.iter().cloned());
    header.push("weight".into());
    w.write_record(&header)?;
    for i in 0..table.len() {
        let mut row: Vec<String> = (0..3).map(|k| table.coords[[i, k]].to_string()).collect();
        row.extend(table.values.row(i).iter().map(|v| v.to_string()));
        row.push(table.weights[i].to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Cell declustering weights: each sample gets `1 / (samples in its cell)`,
/// rescaled to mean 1. The grid origin is the minimum coordinate corner.
pub fn cell_decluster<T: Real>(table: &SampleTable<T>, cell: [T; 3]) -> Result<Array1<T>> {
    if cell.iter().any(|&c| !(c > T::zero())) {
        return Err(Error::InvalidInput("cell sizes must be positive".into()));
    }
    let coords = table.coords();
    let origin: Vec<T> = (0..3).map(|k| coords.column(k).iter().fold(T::infinity(), |m, &x| m.min(x))).collect();
    let keys: Vec<[i64; 3]> = (0..table.len())
        .map(|i| {
            let mut key = [0i64; 3];
            for k in 0..3 {
                key[k] = ((coords[[i, k]] - origin[k]) / cell[k]).floor().to_i64().expect("finite cell index");
            }
            key
        })
        .collect();
    let mut counts: HashMap<[i64; 3], usize> = HashMap::new();
    for key in &keys {
        *counts.entry(*key).or_insert(0) += 1;
    }
    let raw: Array1<T> = keys.iter().map(|k| T::one() / T::of_usize(counts[k])).collect();
    let mean = raw.sum() / T::of_usize(raw.len());
    Ok(raw.mapv(|w| w / mean))
}

/// Weighted descriptive statistics of one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SummaryStats<T: Real> {
    pub names: Vec<String>,
    pub mean: Vec<T>,
    pub std: Vec<T>,
    pub pearson: Array2<T>,
    pub spearman: Array2<T>,
}

pub fn weighted_stats<T: Real>(table: &SampleTable<T>) -> Result<SummaryStats<T>> {
    if table.len() < 2 {
        return Err(Error::InvalidInput("at least two samples are required".into()));
    }
    let d = table.dim();
    let w = table.weights.to_vec();
    let cols: Vec<Vec<T>> = (0..d).map(|j| table.column(j)).collect();
    let mut mean = Vec::with_capacity(d);
    let mut std = Vec::with_capacity(d);
    for (j, c) in cols.iter().enumerate() {
        let var = stats::weighted_variance(c, &w);
        if !(var > T::zero()) {
            return Err(Error::DegenerateVariable(table.names[j].clone()));
        }
        mean.push(stats::weighted_mean(c, &w));
        std.push(var.sqrt());
    }
    let mut pearson = Array2::<T>::eye(d);
    let mut spearman = Array2::<T>::eye(d);
    for i in 0..d {
        for j in (i + 1)..d {
            let degenerate = || Error::DegenerateVariable(table.names[j].clone());
            let p = stats::weighted_pearson(&cols[i], &cols[j], &w).ok_or_else(degenerate)?;
            let s = stats::weighted_spearman(&cols[i], &cols[j], &w).ok_or_else(degenerate)?;
            pearson[[i, j]] = p;
            pearson[[j, i]] = p;
            spearman[[i, j]] = s;
            spearman[[j, i]] = s;
        }
    }
    Ok(SummaryStats { names: table.names.clone(), mean, std, pearson, spearman })
}
