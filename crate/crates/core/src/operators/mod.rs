//! Matrix-free linear operators.
//!
//! Every operator exposes its forward action and the exact transpose of that
//! action. [`adjoint_mismatch`] is the self-test used throughout the test
//! suite: it compares `<K u, v>` against `<u, K^T v>` on random probes.

mod basic;
mod blur;
mod columns;
mod difference;
mod haar;
mod integration;
mod radon;

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub use basic::{Composed, DenseMatrix, Diagonal, FnOperator, Identity, Zero};
pub use blur::{gaussian_blur, GaussianBlur};
pub use columns::{extract_columns, SparseColumns};
pub use difference::ForwardDifference;
pub use haar::{haar_transform, Haar};
pub use integration::{cell_average_restriction, interval_integration, CellAverage, IntervalIntegration};
pub use radon::{radon, Radon};

use crate::vecops::{dot, norm2};

pub trait LinearOperator: Send + Sync {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;

    /// `y = K x`; `y` is overwritten.
    fn apply_into(&self, x: &[f64], y: &mut [f64]);

    /// `x = K^T y`; `x` is overwritten.
    fn adjoint_into(&self, y: &[f64], x: &mut [f64]);

    fn name(&self) -> String;

    /// True when `K^T K = I` and `K K^T = I`.
    fn is_orthonormal(&self) -> bool {
        false
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.in_dim(), "{}: input length", self.name());
        let mut y = vec![0.0; self.out_dim()];
        self.apply_into(x, &mut y);
        y
    }

    fn adjoint(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.out_dim(), "{}: adjoint input length", self.name());
        let mut x = vec![0.0; self.in_dim()];
        self.adjoint_into(y, &mut x);
        x
    }
}

impl std::fmt::Debug for dyn LinearOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}({}x{})", self.name(), self.out_dim(), self.in_dim())
    }
}

pub type Operator = Arc<dyn LinearOperator>;

/// Largest relative adjoint mismatch `|<Ku,v> - <u,K^T v>| / (|Ku| |v|)` over
/// `probes` Gaussian probe pairs.
pub fn adjoint_mismatch(op: &dyn LinearOperator, probes: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..probes {
        let u: Vec<f64> = (0..op.in_dim()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let v: Vec<f64> = (0..op.out_dim()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let ku = op.apply(&u);
        let ktv = op.adjoint(&v);
        let lhs = dot(&ku, &v);
        let rhs = dot(&u, &ktv);
        let scale = (norm2(&ku) * norm2(&v)).max(norm2(&u) * norm2(&ktv));
        if scale > 0.0 {
            worst = worst.max((lhs - rhs).abs() / scale);
        } else {
            worst = worst.max((lhs - rhs).abs());
        }
    }
    worst
}

/// Dense copy of an operator, column by column. Intended for small problems
/// and tests.
pub fn to_dense(op: &dyn LinearOperator) -> DenseMatrix {
    let (m, n) = (op.out_dim(), op.in_dim());
    let mut data = vec![0.0; m * n];
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; m];
    for j in 0..n {
        e[j] = 1.0;
        op.apply_into(&e, &mut col);
        e[j] = 0.0;
        for i in 0..m {
            data[i * n + j] = col[i];
        }
    }
    DenseMatrix::new(m, n, data).expect("consistent dense shape")
}
