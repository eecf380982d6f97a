use super::LinearOperator;
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Block averaging from a fine grid onto a coarser grid whose side divides
/// the fine side.
#[derive(Clone, Debug)]
pub struct CellAverage {
    fine: Grid,
    coarse: Grid,
    factor_x: usize,
    factor_y: usize,
}

pub fn cell_average_restriction(fine: Grid, coarse: Grid) -> Result<CellAverage> {
    if fine.dim() != coarse.dim() {
        return Err(Error::InvalidGrid("fine and coarse grids differ in dimension".into()));
    }
    let divisible = |f: usize, c: usize| c > 0 && f % c == 0;
    if !divisible(fine.cols(), coarse.cols()) || !divisible(fine.rows(), coarse.rows()) {
        return Err(Error::InvalidGrid(format!(
            "fine grid {:?} is not an integer refinement of {:?}",
            fine.side_lengths(),
            coarse.side_lengths()
        )));
    }
    Ok(CellAverage {
        fine,
        coarse,
        factor_x: fine.cols() / coarse.cols(),
        factor_y: fine.rows() / coarse.rows(),
    })
}

impl LinearOperator for CellAverage {
    fn in_dim(&self) -> usize {
        self.fine.len()
    }
    fn out_dim(&self) -> usize {
        self.coarse.len()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        let w = 1.0 / (self.factor_x * self.factor_y) as f64;
        let (fc, cc) = (self.fine.cols(), self.coarse.cols());
        for (i, xi) in x.iter().enumerate() {
            let (r, c) = (i / fc, i % fc);
            y[(r / self.factor_y) * cc + c / self.factor_x] += w * xi;
        }
    }
    fn adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        let w = 1.0 / (self.factor_x * self.factor_y) as f64;
        let (fc, cc) = (self.fine.cols(), self.coarse.cols());
        for (i, xi) in x.iter_mut().enumerate() {
            let (r, c) = (i / fc, i % fc);
            *xi = w * y[(r / self.factor_y) * cc + c / self.factor_x];
        }
    }
    fn name(&self) -> String {
        format!(
            "cell_average({:?} -> {:?})",
            self.fine.side_lengths(),
            self.coarse.side_lengths()
        )
    }
}

/// Averages a piecewise-constant 1D signal on `n` cells of `[0, 1]` over `m`
/// equal measurement intervals. Overlaps are computed in exact integer
/// arithmetic, so `n` need not be a multiple of `m`.
#[derive(Clone, Debug)]
pub struct IntervalIntegration {
    n: usize,
    m: usize,
    offsets: Vec<usize>,
    entries: Vec<(usize, f64)>,
}

pub fn interval_integration(n: usize, m: usize) -> Result<IntervalIntegration> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidParameter("interval integration sizes must be positive".into()));
    }
    // cell i = [i*m, (i+1)*m], interval j = [j*n, (j+1)*n] in units of 1/(n m)
    let mut offsets = vec![0];
    let mut entries = Vec::new();
    for j in 0..m {
        let (lo, hi) = (j * n, (j + 1) * n);
        let first = lo / m;
        let last = (hi - 1) / m;
        for i in first..=last.min(n - 1) {
            let overlap = hi.min((i + 1) * m).saturating_sub(lo.max(i * m));
            if overlap > 0 {
                entries.push((i, overlap as f64 / n as f64));
            }
        }
        offsets.push(entries.len());
    }
    Ok(IntervalIntegration {
        n,
        m,
        offsets,
        entries,
    })
}

impl LinearOperator for IntervalIntegration {
    fn in_dim(&self) -> usize {
        self.n
    }
    fn out_dim(&self) -> usize {
        self.m
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        for (j, yj) in y.iter_mut().enumerate() {
            *yj = self.entries[self.offsets[j]..self.offsets[j + 1]]
                .iter()
                .map(|&(i, w)| w * x[i])
                .sum();
        }
    }
    fn adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        x.fill(0.0);
        for (j, yj) in y.iter().enumerate() {
            for &(i, w) in &self.entries[self.offsets[j]..self.offsets[j + 1]] {
                x[i] += w * yj;
            }
        }
    }
    fn name(&self) -> String {
        format!("interval_integration({} -> {})", self.n, self.m)
    }
}
