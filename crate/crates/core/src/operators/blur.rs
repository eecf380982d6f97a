use super::LinearOperator;
use crate::error::{Error, Result};
use crate::grid::Grid;

/// 1D sparse stencil matrix applied along one axis.
#[derive(Clone, Debug)]
struct AxisStencil {
    n: usize,
    // CSR rows: for output i, entries[offsets[i]..offsets[i+1]]
    offsets: Vec<usize>,
    entries: Vec<(usize, f64)>,
}

impl AxisStencil {
    fn gaussian(n: usize, sigma_cells: f64) -> Self {
        let radius = (4.0 * sigma_cells).floor() as isize;
        let mut taps: Vec<f64> = (-radius..=radius)
            .map(|k| (-0.5 * (k as f64 / sigma_cells).powi(2)).exp())
            .collect();
        let total: f64 = taps.iter().sum();
        taps.iter_mut().for_each(|t| *t /= total);

        let mut offsets = Vec::with_capacity(n + 1);
        let mut entries = Vec::new();
        offsets.push(0);
        let mut row: Vec<(usize, f64)> = Vec::new();
        for i in 0..n {
            row.clear();
            for (t, k) in taps.iter().zip(-radius..=radius) {
                let j = reflect(i as isize + k, n);
                match row.iter_mut().find(|(idx, _)| *idx == j) {
                    Some(e) => e.1 += t,
                    None => row.push((j, *t)),
                }
            }
            row.sort_by_key(|e| e.0);
            entries.extend_from_slice(&row);
            offsets.push(entries.len());
        }
        AxisStencil {
            n,
            offsets,
            entries,
        }
    }

    /// Applies along lines: element `line * line_stride + i * stride`.
    fn apply(&self, x: &[f64], y: &mut [f64], stride: usize, line_starts: &[usize]) {
        for &start in line_starts {
            for i in 0..self.n {
                let mut acc = 0.0;
                for &(j, w) in &self.entries[self.offsets[i]..self.offsets[i + 1]] {
                    acc += w * x[start + j * stride];
                }
                y[start + i * stride] = acc;
            }
        }
    }

    fn apply_transpose(&self, x: &[f64], y: &mut [f64], stride: usize, line_starts: &[usize]) {
        for &start in line_starts {
            for i in 0..self.n {
                y[start + i * stride] = 0.0;
            }
            for i in 0..self.n {
                let xi = x[start + i * stride];
                for &(j, w) in &self.entries[self.offsets[i]..self.offsets[i + 1]] {
                    y[start + j * stride] += w * xi;
                }
            }
        }
    }
}

/// Half-sample symmetric reflection into `0..n`.
fn reflect(j: isize, n: usize) -> usize {
    let n2 = 2 * n as isize;
    let mut k = j.rem_euclid(n2);
    if k >= n as isize {
        k = n2 - 1 - k;
    }
    k as usize
}

/// Separable Gaussian blur with reflective boundaries. The kernel is truncated
/// at four standard deviations and renormalized to unit mass.
#[derive(Clone, Debug)]
pub struct GaussianBlur {
    grid: Grid,
    sigma: f64,
    along_x: AxisStencil,
    along_y: Option<AxisStencil>,
    row_starts: Vec<usize>,
    col_starts: Vec<usize>,
}

pub fn gaussian_blur(grid: Grid, kernel_sigma: f64) -> Result<GaussianBlur> {
    if !(kernel_sigma > 0.0 && kernel_sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "blur sigma must be positive, got {kernel_sigma}"
        )));
    }
    let along_x = AxisStencil::gaussian(grid.cols(), kernel_sigma / grid.hx());
    let along_y = (grid.dim() == 2).then(|| AxisStencil::gaussian(grid.rows(), kernel_sigma / grid.hy()));
    let row_starts = (0..grid.rows()).map(|r| r * grid.cols()).collect();
    let col_starts = (0..grid.cols()).collect();
    Ok(GaussianBlur {
        grid,
        sigma: kernel_sigma,
        along_x,
        along_y,
        row_starts,
        col_starts,
    })
}

impl GaussianBlur {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }
}

impl LinearOperator for GaussianBlur {
    fn in_dim(&self) -> usize {
        self.grid.len()
    }
    fn out_dim(&self) -> usize {
        self.grid.len()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        match &self.along_y {
            None => self.along_x.apply(x, y, 1, &self.row_starts),
            Some(ay) => {
                let mut tmp = vec![0.0; x.len()];
                self.along_x.apply(x, &mut tmp, 1, &self.row_starts);
                ay.apply(&tmp, y, self.grid.cols(), &self.col_starts);
            }
        }
    }
    fn adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        match &self.along_y {
            None => self.along_x.apply_transpose(y, x, 1, &self.row_starts),
            Some(ay) => {
                let mut tmp = vec![0.0; y.len()];
                ay.apply_transpose(y, &mut tmp, self.grid.cols(), &self.col_starts);
                self.along_x.apply_transpose(&tmp, x, 1, &self.row_starts);
            }
        }
    }
    fn name(&self) -> String {
        format!("gaussian_blur(sigma={}, {:?})", self.sigma, self.grid.side_lengths())
    }
}
