use crate::error::{check_dim, Error, Result};
use crate::grid::{Grid, Signal};
use crate::noise::GaussianNoiseModel;
use crate::operators::Operator;
use crate::priors::Prior;
use crate::vecops::{all_finite, sub};

/// `p(u | f) ∝ exp(-½|f - K u|²_{Σ^{-1}} - λ J(u))`.
#[derive(Clone, Debug)]
pub struct Posterior {
    grid: Grid,
    operator: Operator,
    data: Signal,
    noise: GaussianNoiseModel,
    prior: Prior,
}

impl Posterior {
    pub fn new(grid: Grid, operator: Operator, data: Signal, noise: GaussianNoiseModel, prior: Prior) -> Result<Self> {
        check_dim("posterior operator input", grid.len(), operator.in_dim())?;
        check_dim("posterior data length", operator.out_dim(), data.len())?;
        check_dim("posterior noise dimension", data.len(), noise.dim())?;
        check_dim("posterior prior dimension", grid.len(), prior.dim())?;
        Ok(Self {
            grid,
            operator,
            data,
            noise,
            prior,
        })
    }

    /// Same likelihood, new prior weight.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Ok(Self {
            prior: self.prior.with_lambda(lambda)?,
            ..self.clone()
        })
    }

    pub fn with_prior(&self, prior: Prior) -> Result<Self> {
        Self::new(self.grid, self.operator.clone(), self.data.clone(), self.noise.clone(), prior)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.len()
    }

    pub fn operator(&self) -> &Operator {
        &self.operator
    }

    pub fn data(&self) -> &[f64] {
        self.data.values()
    }

    pub fn data_signal(&self) -> &Signal {
        &self.data
    }

    pub fn noise(&self) -> &GaussianNoiseModel {
        &self.noise
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn lambda(&self) -> f64 {
        self.prior.lambda()
    }

    fn check_input(&self, u: &[f64]) -> Result<()> {
        check_dim("posterior input", self.dim(), u.len())?;
        if !all_finite(u) {
            return Err(Error::NonFinite("posterior input"));
        }
        Ok(())
    }

    /// `K u - f`.
    pub fn residual(&self, u: &[f64]) -> Vec<f64> {
        let mut r = self.operator.apply(u);
        for (ri, fi) in r.iter_mut().zip(self.data()) {
            *ri -= fi;
        }
        r
    }

    /// `½|f - K u|²_{Σ^{-1}}`.
    pub fn data_fidelity(&self, u: &[f64]) -> f64 {
        0.5 * self.noise.weighted_sq_norm_unchecked(&self.residual(u))
    }

    /// Negative log posterior without normalizing constant.
    pub fn neg_log_posterior(&self, u: &[f64]) -> Result<f64> {
        self.check_input(u)?;
        Ok(self.energy_unchecked(u))
    }

    pub(crate) fn energy_unchecked(&self, u: &[f64]) -> f64 {
        self.data_fidelity(u) + self.prior.lambda() * self.prior.energy(u)
    }

    pub fn neg_log_posterior_signal(&self, u: &Signal) -> Result<f64> {
        if u.grid() != &self.grid {
            return Err(Error::InvalidGrid("signal is not on the reconstruction grid".into()));
        }
        self.neg_log_posterior(u.values())
    }

    /// `K^T Σ^{-1} (K u - f)`.
    pub fn data_gradient(&self, u: &[f64]) -> Vec<f64> {
        let r = self.residual(u);
        self.operator.adjoint(&self.noise.apply_precision(&r))
    }

    /// `K^T Σ^{-1} (K u - f) + λ q` with `q` the canonical subgradient.
    pub fn neg_log_posterior_gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_dim("posterior gradient input", self.dim(), u.len())?;
        let mut g = self.data_gradient(u);
        let q = self.prior.subgradient(u);
        let lambda = self.prior.lambda();
        for (gi, qi) in g.iter_mut().zip(&q) {
            *gi += lambda * qi;
        }
        Ok(g)
    }

    /// `-(1/λ) K^T Σ^{-1} (K u - f)`: the element of `∂J(u)` that certifies
    /// `u` as the MAP estimate.
    pub fn subgradient_certificate(&self, u: &[f64]) -> Vec<f64> {
        let s = -1.0 / self.prior.lambda();
        self.data_gradient(u).into_iter().map(|g| s * g).collect()
    }

    /// `½|K (u - v)|²_{Σ^{-1}}`.
    pub fn output_distance(&self, u: &[f64], v: &[f64]) -> f64 {
        0.5 * self.noise.weighted_sq_norm_unchecked(&self.operator.apply(&sub(u, v)))
    }
}
