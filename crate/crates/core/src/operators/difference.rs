use super::LinearOperator;

/// 1D forward differences `(D u)_k = u_{k+1} - u_k`, `k = 0..n-1`.
#[derive(Clone, Copy, Debug)]
pub struct ForwardDifference {
    n: usize,
}

impl ForwardDifference {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "forward differences need n >= 2");
        ForwardDifference { n }
    }
}

impl LinearOperator for ForwardDifference {
    fn in_dim(&self) -> usize {
        self.n
    }
    fn out_dim(&self) -> usize {
        self.n - 1
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        for (k, yk) in y.iter_mut().enumerate() {
            *yk = x[k + 1] - x[k];
        }
    }
    fn adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        let m = self.n - 1;
        for (i, xi) in x.iter_mut().enumerate() {
            let left = if i >= 1 { y[i - 1] } else { 0.0 };
            let right = if i < m { y[i] } else { 0.0 };
            *xi = left - right;
        }
    }
    fn name(&self) -> String {
        format!("forward_difference({})", self.n)
    }
}
