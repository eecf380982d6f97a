use std::f64::consts::FRAC_1_SQRT_2;

use super::LinearOperator;
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Orthonormal Haar analysis operator `W` (Mallat layout: scaling
/// coefficients first, then details from coarse to fine). The adjoint is the
/// synthesis transform, so `W^T W = W W^T = I`.
#[derive(Clone, Debug)]
pub struct Haar {
    grid: Grid,
    side: usize,
    levels: usize,
}

pub fn haar_transform(grid: Grid, levels: usize) -> Result<Haar> {
    let side = match grid.dim() {
        1 => grid.cols(),
        _ if grid.is_square() => grid.cols(),
        _ => {
            return Err(Error::InvalidGrid(
                "2D Haar transform needs a square grid".into(),
            ))
        }
    };
    if !side.is_power_of_two() {
        return Err(Error::InvalidGrid(format!(
            "Haar transform needs a power-of-two side, got {side}"
        )));
    }
    let max_levels = side.trailing_zeros() as usize;
    if levels > max_levels {
        return Err(Error::InvalidParameter(format!(
            "{levels} Haar levels exceed log2(side) = {max_levels}"
        )));
    }
    Ok(Haar { grid, side, levels })
}

impl Haar {
    pub fn full_depth(grid: Grid) -> Result<Haar> {
        let side = grid.cols();
        haar_transform(grid, side.trailing_zeros() as usize)
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Side length of the scaling-coefficient block.
    pub fn coarse_side(&self) -> usize {
        self.side >> self.levels
    }

    /// Level of each coefficient: 0 for scaling coefficients, `1..=levels`
    /// for details from coarse to fine.
    pub fn coefficient_levels(&self) -> Vec<usize> {
        let coarse = self.coarse_side();
        (0..self.grid.len())
            .map(|i| {
                let extent = if self.grid.dim() == 1 {
                    i
                } else {
                    (i / self.side).max(i % self.side)
                };
                if extent < coarse {
                    0
                } else {
                    // extent in [coarse * 2^(l-1), coarse * 2^l)
                    let mut l = 1;
                    while extent >= coarse << l {
                        l += 1;
                    }
                    l
                }
            })
            .collect()
    }
}

fn forward_step(v: &mut [f64], len: usize, stride: usize, tmp: &mut Vec<f64>) {
    let h = len / 2;
    tmp.clear();
    tmp.resize(len, 0.0);
    for k in 0..h {
        let a = v[2 * k * stride];
        let b = v[(2 * k + 1) * stride];
        tmp[k] = (a + b) * FRAC_1_SQRT_2;
        tmp[h + k] = (a - b) * FRAC_1_SQRT_2;
    }
    for (k, t) in tmp.iter().enumerate() {
        v[k * stride] = *t;
    }
}

fn inverse_step(v: &mut [f64], len: usize, stride: usize, tmp: &mut Vec<f64>) {
    let h = len / 2;
    tmp.clear();
    tmp.resize(len, 0.0);
    for k in 0..h {
        let s = v[k * stride];
        let d = v[(h + k) * stride];
        tmp[2 * k] = (s + d) * FRAC_1_SQRT_2;
        tmp[2 * k + 1] = (s - d) * FRAC_1_SQRT_2;
    }
    for (k, t) in tmp.iter().enumerate() {
        v[k * stride] = *t;
    }
}

impl LinearOperator for Haar {
    fn in_dim(&self) -> usize {
        self.grid.len()
    }
    fn out_dim(&self) -> usize {
        self.grid.len()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
        let mut tmp = Vec::new();
        let n = self.side;
        for l in 0..self.levels {
            let len = n >> l;
            if self.grid.dim() == 1 {
                forward_step(y, len, 1, &mut tmp);
            } else {
                for r in 0..len {
                    forward_step(&mut y[r * n..], len, 1, &mut tmp);
                }
                for c in 0..len {
                    forward_step(&mut y[c..], len, n, &mut tmp);
                }
            }
        }
    }
    fn adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        x.copy_from_slice(y);
        let mut tmp = Vec::new();
        let n = self.side;
        for l in (0..self.levels).rev() {
            let len = n >> l;
            if self.grid.dim() == 1 {
                inverse_step(x, len, 1, &mut tmp);
            } else {
                for c in 0..len {
                    inverse_step(&mut x[c..], len, n, &mut tmp);
                }
                for r in 0..len {
                    inverse_step(&mut x[r * n..], len, 1, &mut tmp);
                }
            }
        }
    }
    fn name(&self) -> String {
        format!("haar({:?}, {} levels)", self.grid.side_lengths(), self.levels)
    }
    fn is_orthonormal(&self) -> bool {
        true
    }
}
