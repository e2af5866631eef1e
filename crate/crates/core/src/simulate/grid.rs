use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regular block grid; node `(i, j, k)` sits at `origin + (i, j, k)·cell`,
/// with `i` varying fastest in linear node order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: [f64; 3],
    pub cell: [f64; 3],
    pub counts: [usize; 3],
}

impl GridSpec {
    pub fn new(origin: [f64; 3], cell: [f64; 3], counts: [usize; 3]) -> Result<Self> {
        let g = Self { origin, cell, counts };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.counts.contains(&0) {
            return Err(Error::InvalidInput("grid counts must be at least 1".into()));
        }
        if self.cell.iter().any(|&c| !(c > 0.0)) {
            return Err(Error::InvalidInput("grid cell sizes must be positive".into()));
        }
        if self.origin.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("grid origin must be finite".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.counts[0] * (j + self.counts[1] * k)
    }

    pub fn ijk(&self, node: usize) -> [usize; 3] {
        let [nx, ny, _] = self.counts;
        [node % nx, (node / nx) % ny, node / (nx * ny)]
    }

    pub fn coord(&self, node: usize) -> [f64; 3] {
        let ijk = self.ijk(node);
        std::array::from_fn(|a| self.origin[a] + ijk[a] as f64 * self.cell[a])
    }

    /// Node whose cell contains `p`, if inside the grid.
    pub fn node_containing(&self, p: [f64; 3]) -> Option<usize> {
        let mut ijk = [0usize; 3];
        for a in 0..3 {
            let f = ((p[a] - self.origin[a]) / self.cell[a]).round();
            if f < 0.0 || f >= self.counts[a] as f64 {
                return None;
            }
            ijk[a] = f as usize;
        }
        Some(self.index(ijk[0], ijk[1], ijk[2]))
    }
}
