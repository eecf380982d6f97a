use crate::error::{check_dim, Error, Result};
use crate::operators::Operator;

/// Noise precision `Σ^{-1}`.
#[derive(Clone)]
pub enum Precision {
    Diagonal(Vec<f64>),
    /// General SPD precision, applied through a user-supplied operator.
    Operator(Operator),
}

/// Zero-mean Gaussian measurement noise.
#[derive(Clone)]
pub struct GaussianNoiseModel {
    precision: Precision,
    sigma: Option<f64>,
}

impl std::fmt::Debug for GaussianNoiseModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.precision {
            Precision::Diagonal(d) => write!(f, "GaussianNoiseModel(diag, m={}, sigma={:?})", d.len(), self.sigma),
            Precision::Operator(op) => write!(f, "GaussianNoiseModel({})", op.name()),
        }
    }
}

impl GaussianNoiseModel {
    /// `Σ = σ² I` on `m` measurements.
    pub fn from_sigma(m: usize, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise sigma must be positive, got {sigma}")));
        }
        Ok(Self {
            precision: Precision::Diagonal(vec![1.0 / (sigma * sigma); m]),
            sigma: Some(sigma),
        })
    }

    pub fn diagonal(precision: Vec<f64>) -> Result<Self> {
        if precision.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
            return Err(Error::InvalidParameter("diagonal precisions must be positive".into()));
        }
        Ok(Self {
            precision: Precision::Diagonal(precision),
            sigma: None,
        })
    }

    pub fn from_operator(op: Operator) -> Result<Self> {
        check_dim("precision operator", op.in_dim(), op.out_dim())?;
        Ok(Self {
            precision: Precision::Operator(op),
            sigma: None,
        })
    }

    pub fn dim(&self) -> usize {
        match &self.precision {
            Precision::Diagonal(d) => d.len(),
            Precision::Operator(op) => op.in_dim(),
        }
    }

    pub fn sigma(&self) -> Option<f64> {
        self.sigma
    }

    pub fn precision(&self) -> &Precision {
        &self.precision
    }

    pub fn diagonal_precision(&self) -> Option<&[f64]> {
        match &self.precision {
            Precision::Diagonal(d) => Some(d),
            Precision::Operator(_) => None,
        }
    }

    /// `Σ^{-1} y`, written into `out`.
    pub fn apply_precision_into(&self, y: &[f64], out: &mut [f64]) {
        match &self.precision {
            Precision::Diagonal(d) => {
                for ((o, yi), di) in out.iter_mut().zip(y).zip(d) {
                    *o = yi * di;
                }
            }
            Precision::Operator(op) => op.apply_into(y, out),
        }
    }

    pub fn apply_precision(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; y.len()];
        self.apply_precision_into(y, &mut out);
        out
    }

    /// `y^T Σ^{-1} y`.
    pub fn weighted_sq_norm(&self, y: &[f64]) -> Result<f64> {
        check_dim("weighted_sq_norm", self.dim(), y.len())?;
        Ok(self.weighted_sq_norm_unchecked(y))
    }

    pub(crate) fn weighted_sq_norm_unchecked(&self, y: &[f64]) -> f64 {
        match &self.precision {
            Precision::Diagonal(d) => y.iter().zip(d).map(|(v, p)| v * v * p).sum(),
            Precision::Operator(op) => crate::vecops::dot(y, &op.apply(y)),
        }
    }
}
