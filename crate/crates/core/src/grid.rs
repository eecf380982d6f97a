//! Regular grids on the unit interval / unit square and signals living on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A regular 1D or 2D cell grid. Pixel coordinates are cell centers.
///
/// 2D grids are stored row-major: index `r * cols + c` has center
/// `((c + 0.5) * hx, (r + 0.5) * hy)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    rows: usize,
    cols: usize,
    dim: u8,
    extent: [f64; 2],
}

impl Grid {
    pub fn new_1d(n: usize) -> Result<Self> {
        Self::with_extent_1d(n, 1.0)
    }

    pub fn with_extent_1d(n: usize, extent: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGrid("1D grid needs at least one cell".into()));
        }
        if !(extent > 0.0 && extent.is_finite()) {
            return Err(Error::InvalidGrid(format!("extent must be positive, got {extent}")));
        }
        Ok(Grid {
            rows: 1,
            cols: n,
            dim: 1,
            extent: [extent, 1.0],
        })
    }

    pub fn new_2d(rows: usize, cols: usize) -> Result<Self> {
        Self::with_extent_2d(rows, cols, [1.0, 1.0])
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new_2d(n, n)
    }

    /// `extent = [x extent (columns), y extent (rows)]`.
    pub fn with_extent_2d(rows: usize, cols: usize, extent: [f64; 2]) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidGrid(format!("empty 2D grid {rows}x{cols}")));
        }
        if !extent.iter().all(|e| *e > 0.0 && e.is_finite()) {
            return Err(Error::InvalidGrid(format!("extents must be positive, got {extent:?}")));
        }
        Ok(Grid {
            rows,
            cols,
            dim: 2,
            extent,
        })
    }

    pub fn dim(&self) -> u8 {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of cells.
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn extent(&self) -> [f64; 2] {
        self.extent
    }

    pub fn is_square(&self) -> bool {
        self.dim == 2 && self.rows == self.cols
    }

    /// Cell width along x (columns).
    pub fn hx(&self) -> f64 {
        self.extent[0] / self.cols as f64
    }

    /// Cell height along y (rows); 1D grids report the unit extent.
    pub fn hy(&self) -> f64 {
        if self.dim == 1 {
            1.0
        } else {
            self.extent[1] / self.rows as f64
        }
    }

    pub fn cell_volume(&self) -> f64 {
        if self.dim == 1 {
            self.hx()
        } else {
            self.hx() * self.hy()
        }
    }

    /// Center of cell `i` (1D grids put the coordinate in `.0`).
    pub fn cell_center(&self, i: usize) -> (f64, f64) {
        let r = i / self.cols;
        let c = i % self.cols;
        let x = (c as f64 + 0.5) * self.hx();
        if self.dim == 1 {
            (x, 0.0)
        } else {
            (x, (r as f64 + 0.5) * self.hy())
        }
    }

    pub fn side_lengths(&self) -> Vec<usize> {
        if self.dim == 1 {
            vec![self.cols]
        } else {
            vec![self.rows, self.cols]
        }
    }
}

/// Values on a grid; every value is finite.
#[derive(Clone, Debug, PartialEq)]
pub struct Signal {
    grid: Grid,
    values: Vec<f64>,
}

impl Signal {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        crate::error::check_dim("signal values", grid.len(), values.len())?;
        if !crate::vecops::all_finite(&values) {
            return Err(Error::NonFinite("signal values"));
        }
        Ok(Signal { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Signal {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Signal {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = (0..grid.len())
            .map(|i| {
                let (x, y) = grid.cell_center(i);
                f(x, y)
            })
            .collect();
        Signal::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// `max - min`.
    pub fn range(&self) -> f64 {
        self.max() - self.min()
    }
}
