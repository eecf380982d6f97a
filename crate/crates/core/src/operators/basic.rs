use std::fmt;
use std::sync::Arc;

use super::{LinearOperator, Operator};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct Identity {
    n: usize,
}

impl Identity {
    pub fn new(n: usize) -> Self {
        Identity { n }
    }
}

impl LinearOperator for Identity {
    fn in_dim(&self) -> usize {
        self.n
    }
    fn out_dim(&self) -> usize {
        self.n
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }
    fn adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        x.copy_from_slice(y);
    }
    fn name(&self) -> String {
        format!("identity({})", self.n)
    }
    fn is_orthonormal(&self) -> bool {
        true
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Zero {
    rows: usize,
    cols: usize,
}

impl Zero {
    pub fn new(rows: usize, cols: usize) -> Self {
        Zero { rows, cols }
    }
}

impl LinearOperator for Zero {
    fn in_dim(&self) -> usize {
        self.cols
    }
    fn out_dim(&self) -> usize {
        self.rows
    }
    fn apply_into(&self, _x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
    }
    fn adjoint_into(&self, _y: &[f64], x: &mut [f64]) {
        x.fill(0.0);
    }
    fn name(&self) -> String {
        format!("zero({}x{})", self.rows, self.cols)
    }
}

#[derive(Clone, Debug)]
pub struct Diagonal {
    diag: Vec<f64>,
}

impl Diagonal {
    pub fn new(diag: Vec<f64>) -> Self {
        Diagonal { diag }
    }
}

impl LinearOperator for Diagonal {
    fn in_dim(&self) -> usize {
        self.diag.len()
    }
    fn out_dim(&self) -> usize {
        self.diag.len()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        for ((yi, xi), di) in y.iter_mut().zip(x).zip(&self.diag) {
            *yi = di * xi;
        }
    }
    fn adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        self.apply_into(y, x);
    }
    fn name(&self) -> String {
        format!("diagonal({})", self.diag.len())
    }
}

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DenseMatrix({}x{})", self.rows, self.cols)
    }
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "dense matrix data",
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        DenseMatrix { rows: n, cols: n, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

impl LinearOperator for DenseMatrix {
    fn in_dim(&self) -> usize {
        self.cols
    }
    fn out_dim(&self) -> usize {
        self.rows
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        for (yi, row) in y.iter_mut().zip(self.data.chunks(self.cols)) {
            *yi = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
    fn adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        x.fill(0.0);
        for (yi, row) in y.iter().zip(self.data.chunks(self.cols)) {
            for (xj, a) in x.iter_mut().zip(row) {
                *xj += a * yi;
            }
        }
    }
    fn name(&self) -> String {
        format!("dense({}x{})", self.rows, self.cols)
    }
}

/// `outer ∘ inner`.
pub struct Composed {
    outer: Operator,
    inner: Operator,
}

impl Composed {
    pub fn new(outer: Operator, inner: Operator) -> Result<Self> {
        if outer.in_dim() != inner.out_dim() {
            return Err(Error::DimensionMismatch {
                context: "operator composition",
                expected: outer.in_dim(),
                actual: inner.out_dim(),
            });
        }
        Ok(Composed { outer, inner })
    }
}

impl LinearOperator for Composed {
    fn in_dim(&self) -> usize {
        self.inner.in_dim()
    }
    fn out_dim(&self) -> usize {
        self.outer.out_dim()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let mid = self.inner.apply(x);
        self.outer.apply_into(&mid, y);
    }
    fn adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        let mid = self.outer.adjoint(y);
        self.inner.adjoint_into(&mid, x);
    }
    fn name(&self) -> String {
        format!("{} ∘ {}", self.outer.name(), self.inner.name())
    }
    fn is_orthonormal(&self) -> bool {
        self.outer.is_orthonormal() && self.inner.is_orthonormal()
    }
}

type ApplyFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// Operator defined by a pair of user callbacks. The caller is responsible
/// for the adjoint being the transpose of the forward action.
pub struct FnOperator {
    in_dim: usize,
    out_dim: usize,
    label: String,
    forward: Arc<ApplyFn>,
    backward: Arc<ApplyFn>,
}

impl FnOperator {
    pub fn new(
        label: impl Into<String>,
        in_dim: usize,
        out_dim: usize,
        forward: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        backward: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        FnOperator {
            in_dim,
            out_dim,
            label: label.into(),
            forward: Arc::new(forward),
            backward: Arc::new(backward),
        }
    }
}

impl LinearOperator for FnOperator {
    fn in_dim(&self) -> usize {
        self.in_dim
    }
    fn out_dim(&self) -> usize {
        self.out_dim
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        (self.forward)(x, y)
    }
    fn adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        (self.backward)(y, x)
    }
    fn name(&self) -> String {
        self.label.clone()
    }
}
