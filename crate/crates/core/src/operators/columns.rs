use super::LinearOperator;

/// Compressed-column copy of an operator, used by the componentwise samplers.
#[derive(Clone, Debug)]
pub struct SparseColumns {
    rows: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<u32>,
    values: Vec<f64>,
}

impl SparseColumns {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.col_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn column(&self, j: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.col_ptr[j], self.col_ptr[j + 1]);
        (&self.row_idx[a..b], &self.values[a..b])
    }

    /// `sum_i w_i col_i^2`, or the plain squared norm without weights.
    pub fn weighted_sq_norm(&self, j: usize, weights: Option<&[f64]>) -> f64 {
        let (idx, val) = self.column(j);
        match weights {
            Some(w) => idx.iter().zip(val).map(|(&i, v)| w[i as usize] * v * v).sum(),
            None => val.iter().map(|v| v * v).sum(),
        }
    }
}

/// Extracts all columns `K e_j`, skipping exact zeros.
pub fn extract_columns(op: &dyn LinearOperator) -> SparseColumns {
    let (m, n) = (op.out_dim(), op.in_dim());
    let mut col_ptr = Vec::with_capacity(n + 1);
    let mut row_idx = Vec::new();
    let mut values = Vec::new();
    col_ptr.push(0);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; m];
    for j in 0..n {
        e[j] = 1.0;
        op.apply_into(&e, &mut col);
        e[j] = 0.0;
        for (i, v) in col.iter().enumerate() {
            if *v != 0.0 {
                row_idx.push(i as u32);
                values.push(*v);
            }
        }
        col_ptr.push(values.len());
    }
    SparseColumns {
        rows: m,
        col_ptr,
        row_idx,
        values,
    }
}
