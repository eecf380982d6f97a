use std::f64::consts::PI;

use super::LinearOperator;
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Parallel-beam Radon transform, pixel driven.
///
/// Angles are `k * pi / num_angles`. The detector spans the grid's
/// circumscribed diameter with `num_bins` equal bins. Each pixel's mass
/// `u * area` is projected onto the detector coordinate
/// `s = (x - cx) cos(theta) + (y - cy) sin(theta)` and split linearly between
/// the two nearest bin centers, so every angle's bins sum to the image mass.
/// The adjoint is the exact transpose of the same weights.
#[derive(Clone, Debug)]
pub struct Radon {
    grid: Grid,
    num_angles: usize,
    num_bins: usize,
    // per (angle, pixel): lower bin and weight of the lower bin
    lower_bin: Vec<u32>,
    lower_weight: Vec<f64>,
    area: f64,
}

pub fn radon(grid: Grid, num_angles: usize, num_bins: usize) -> Result<Radon> {
    if grid.dim() != 2 || grid.rows() < 2 || grid.cols() < 2 {
        return Err(Error::InvalidGrid(format!(
            "radon needs a non-degenerate 2D grid, got {:?}",
            grid.side_lengths()
        )));
    }
    if num_angles == 0 || num_bins < 2 {
        return Err(Error::InvalidParameter(format!(
            "radon needs at least one angle and two bins (got {num_angles} angles, {num_bins} bins)"
        )));
    }
    let [ex, ey] = grid.extent();
    let (cx, cy) = (0.5 * ex, 0.5 * ey);
    let half = 0.5 * (ex * ex + ey * ey).sqrt();
    let width = 2.0 * half / num_bins as f64;
    let n = grid.len();
    let mut lower_bin = Vec::with_capacity(n * num_angles);
    let mut lower_weight = Vec::with_capacity(n * num_angles);
    for a in 0..num_angles {
        let theta = PI * a as f64 / num_angles as f64;
        let (st, ct) = theta.sin_cos();
        for i in 0..n {
            let (x, y) = grid.cell_center(i);
            let s = (x - cx) * ct + (y - cy) * st;
            let p = (s + half) / width - 0.5;
            let (bin, w) = if p <= 0.0 {
                (0, 1.0)
            } else if p >= (num_bins - 1) as f64 {
                (num_bins - 2, 0.0)
            } else {
                let b = p.floor();
                (b as usize, 1.0 - (p - b))
            };
            lower_bin.push(bin as u32);
            lower_weight.push(w);
        }
    }
    Ok(Radon {
        grid,
        num_angles,
        num_bins,
        lower_bin,
        lower_weight,
        area: grid.cell_volume(),
    })
}

impl Radon {
    pub fn num_angles(&self) -> usize {
        self.num_angles
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn angles(&self) -> Vec<f64> {
        (0..self.num_angles)
            .map(|a| PI * a as f64 / self.num_angles as f64)
            .collect()
    }

    /// Detector coordinate of bin centers.
    pub fn bin_centers(&self) -> Vec<f64> {
        let [ex, ey] = self.grid.extent();
        let half = 0.5 * (ex * ex + ey * ey).sqrt();
        let width = 2.0 * half / self.num_bins as f64;
        (0..self.num_bins)
            .map(|b| -half + (b as f64 + 0.5) * width)
            .collect()
    }
}

impl LinearOperator for Radon {
    fn in_dim(&self) -> usize {
        self.grid.len()
    }
    fn out_dim(&self) -> usize {
        self.num_angles * self.num_bins
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        let n = self.grid.len();
        for a in 0..self.num_angles {
            let out = &mut y[a * self.num_bins..(a + 1) * self.num_bins];
            let bins = &self.lower_bin[a * n..(a + 1) * n];
            let weights = &self.lower_weight[a * n..(a + 1) * n];
            for ((xi, &b), &w) in x.iter().zip(bins).zip(weights) {
                let m = xi * self.area;
                out[b as usize] += w * m;
                out[b as usize + 1] += (1.0 - w) * m;
            }
        }
    }
    fn adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        x.fill(0.0);
        let n = self.grid.len();
        for a in 0..self.num_angles {
            let sino = &y[a * self.num_bins..(a + 1) * self.num_bins];
            let bins = &self.lower_bin[a * n..(a + 1) * n];
            let weights = &self.lower_weight[a * n..(a + 1) * n];
            for ((xi, &b), &w) in x.iter_mut().zip(bins).zip(weights) {
                *xi += self.area * (w * sino[b as usize] + (1.0 - w) * sino[b as usize + 1]);
            }
        }
    }
    fn name(&self) -> String {
        format!(
            "radon({}x{}, {} angles, {} bins)",
            self.grid.rows(),
            self.grid.cols(),
            self.num_angles,
            self.num_bins
        )
    }
}
