//! Log-concave Gibbs priors `p(u) ∝ exp(-λ J(u))`.
//!
//! Every prior exposes its energy `J`, a canonical subgradient (`sign(0) = 0`
//! wherever a sign appears), a proximal map, and the induced Bregman distance.

pub mod energies;
mod tv;

use std::sync::Arc;

use crate::error::{check_dim, Error, Result};
use crate::krylov::{conjugate_gradient, CgOptions};
use crate::operators::{ForwardDifference, Identity, Operator};
use crate::vecops::{dot, sign0, soft_threshold, sub};

pub use energies::ScalarEnergy;
pub use tv::tv_prox;

#[derive(Clone)]
pub enum PriorKind {
    /// `J(u) = β/(2λ) |L u|²`; `L = None` means the identity.
    Gaussian { beta: f64, l: Option<Operator> },
    /// `J(u) = Σ_j w_j |(Φ u)_j|`; `Φ = None` means the pixel basis, no
    /// weights means unit weights.
    L1 {
        transform: Option<Operator>,
        weights: Option<Vec<f64>>,
    },
    /// `J(u) = Σ_i |u_{i+1} - u_i|`.
    Tv1d,
}

#[derive(Clone)]
pub struct Prior {
    lambda: f64,
    n: usize,
    kind: PriorKind,
}

/// A Bregman distance together with the subgradient it was taken at.
#[derive(Clone, Debug)]
pub struct BregmanEval {
    pub value: f64,
    pub subgradient_used: Vec<f64>,
}

impl std::fmt::Debug for Prior {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Prior({}, n={}, lambda={})", self.name(), self.n, self.lambda)
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")))
    }
}

impl Prior {
    pub fn gaussian(n: usize, lambda: f64, beta: f64, l: Option<Operator>) -> Result<Self> {
        check_lambda(lambda)?;
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
        }
        if let Some(l) = &l {
            check_dim("gaussian prior L (input)", n, l.in_dim())?;
            check_dim("gaussian prior L (output)", n, l.out_dim())?;
        }
        Ok(Self {
            lambda,
            n,
            kind: PriorKind::Gaussian { beta, l },
        })
    }

    pub fn l1(n: usize, lambda: f64, transform: Option<Operator>) -> Result<Self> {
        check_lambda(lambda)?;
        if let Some(t) = &transform {
            check_dim("l1 prior transform", n, t.in_dim())?;
        }
        Ok(Self {
            lambda,
            n,
            kind: PriorKind::L1 {
                transform,
                weights: None,
            },
        })
    }

    /// Weighted ℓ1 norm of orthonormal wavelet coefficients.
    pub fn besov(lambda: f64, weights: Vec<f64>, wavelet: Operator) -> Result<Self> {
        check_lambda(lambda)?;
        if !wavelet.is_orthonormal() {
            return Err(Error::InvalidParameter(format!("{} is not orthonormal", wavelet.name())));
        }
        check_dim("besov weights", wavelet.out_dim(), weights.len())?;
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter("besov weights must be positive".into()));
        }
        Ok(Self {
            lambda,
            n: wavelet.in_dim(),
            kind: PriorKind::L1 {
                transform: Some(wavelet),
                weights: Some(weights),
            },
        })
    }

    pub fn tv1d(n: usize, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        if n < 2 {
            return Err(Error::InvalidParameter(format!("TV prior needs n >= 2, got {n}")));
        }
        Ok(Self {
            lambda,
            n,
            kind: PriorKind::Tv1d,
        })
    }

    /// Same energy with a different weight λ (β is kept for Gaussian priors).
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self {
            lambda,
            ..self.clone()
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &PriorKind {
        &self.kind
    }

    pub fn name(&self) -> String {
        match &self.kind {
            PriorKind::Gaussian { l: None, .. } => "gaussian".into(),
            PriorKind::Gaussian { l: Some(l), .. } => format!("gaussian[{}]", l.name()),
            PriorKind::L1 { transform: None, .. } => "l1".into(),
            PriorKind::L1 {
                transform: Some(t),
                weights,
            } => {
                if weights.is_some() {
                    format!("besov[{}]", t.name())
                } else {
                    format!("l1[{}]", t.name())
                }
            }
            PriorKind::Tv1d => "tv1d".into(),
        }
    }

    /// True for energies with `J(t u) = t J(u)`, `t ≥ 0`.
    pub fn is_one_homogeneous(&self) -> bool {
        !matches!(self.kind, PriorKind::Gaussian { .. })
    }

    /// The sparsifying transform and per-coefficient weights of an ℓ1-type
    /// prior (`Φ = D` for TV).
    pub fn sparse_split(&self) -> Option<(Operator, Vec<f64>)> {
        match &self.kind {
            PriorKind::Gaussian { .. } => None,
            PriorKind::L1 { transform, weights } => {
                let phi: Operator = transform.clone().unwrap_or_else(|| Arc::new(Identity::new(self.n)));
                let w = weights.clone().unwrap_or_else(|| vec![1.0; phi.out_dim()]);
                Some((phi, w))
            }
            PriorKind::Tv1d => Some((Arc::new(ForwardDifference::new(self.n)), vec![1.0; self.n - 1])),
        }
    }

    /// `Φ u` for ℓ1-type priors, `D u` for TV, `L u` for Gaussian.
    pub fn coefficients(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.n, "prior coefficients: length");
        match &self.kind {
            PriorKind::Gaussian { l, .. } | PriorKind::L1 { transform: l, .. } => match l {
                Some(op) => op.apply(u),
                None => u.to_vec(),
            },
            PriorKind::Tv1d => u.windows(2).map(|w| w[1] - w[0]).collect(),
        }
    }

    fn weight(&self, j: usize) -> f64 {
        match &self.kind {
            PriorKind::L1 {
                weights: Some(w), ..
            } => w[j],
            _ => 1.0,
        }
    }

    /// Coefficient weights of ℓ1-type priors (ones when unweighted).
    pub fn coefficient_weights(&self) -> Vec<f64> {
        let len = match &self.kind {
            PriorKind::Tv1d => self.n - 1,
            PriorKind::L1 {
                transform: Some(t), ..
            } => t.out_dim(),
            _ => self.n,
        };
        (0..len).map(|j| self.weight(j)).collect()
    }

    pub fn energy(&self, u: &[f64]) -> f64 {
        let c = self.coefficients(u);
        match &self.kind {
            PriorKind::Gaussian { beta, .. } => beta / (2.0 * self.lambda) * dot(&c, &c),
            _ => c.iter().enumerate().map(|(j, v)| self.weight(j) * v.abs()).sum(),
        }
    }

    /// Canonical element of `∂J(u)`.
    pub fn subgradient(&self, u: &[f64]) -> Vec<f64> {
        let c = self.coefficients(u);
        match &self.kind {
            PriorKind::Gaussian { beta, l } => {
                let s = beta / self.lambda;
                let mut g = match l {
                    Some(op) => op.adjoint(&c),
                    None => c,
                };
                g.iter_mut().for_each(|v| *v *= s);
                g
            }
            PriorKind::L1 { transform, .. } => {
                let s: Vec<f64> = c.iter().enumerate().map(|(j, v)| self.weight(j) * sign0(*v)).collect();
                match transform {
                    Some(op) => op.adjoint(&s),
                    None => s,
                }
            }
            PriorKind::Tv1d => {
                let s: Vec<f64> = c.iter().map(|v| sign0(*v)).collect();
                let mut g = vec![0.0; self.n];
                for (k, sk) in s.iter().enumerate() {
                    g[k] -= sk;
                    g[k + 1] += sk;
                }
                g
            }
        }
    }

    /// `argmin_x ½|x - v|² + t J(x)`.
    pub fn prox(&self, v: &[f64], t: f64) -> Result<Vec<f64>> {
        check_dim("prox input", self.n, v.len())?;
        if !(t >= 0.0) {
            return Err(Error::InvalidParameter(format!("prox step must be >= 0, got {t}")));
        }
        match &self.kind {
            PriorKind::Gaussian { beta, l } => {
                let s = t * beta / self.lambda;
                match l {
                    None => Ok(v.iter().map(|x| x / (1.0 + s)).collect()),
                    Some(op) => {
                        let mut x = v.to_vec();
                        let mut lx = vec![0.0; self.n];
                        let mut ltlx = vec![0.0; self.n];
                        let out = conjugate_gradient(
                            |p, y| {
                                op.apply_into(p, &mut lx);
                                op.adjoint_into(&lx, &mut ltlx);
                                for i in 0..p.len() {
                                    y[i] = p[i] + s * ltlx[i];
                                }
                            },
                            None,
                            v,
                            &mut x,
                            CgOptions {
                                rel_tol: 1e-14,
                                max_iters: 10 * self.n + 100,
                            },
                        );
                        if out.near_singular {
                            log::warn!("gaussian prox: CG reported near-singular system");
                        }
                        Ok(x)
                    }
                }
            }
            PriorKind::L1 { transform, .. } => match transform {
                None => Ok(v
                    .iter()
                    .enumerate()
                    .map(|(j, x)| soft_threshold(*x, t * self.weight(j)))
                    .collect()),
                Some(op) => {
                    if !op.is_orthonormal() {
                        return Err(Error::UnsupportedPrior(format!(
                            "prox of l1 prior needs an orthonormal transform, {} is not",
                            op.name()
                        )));
                    }
                    let c: Vec<f64> = op
                        .apply(v)
                        .iter()
                        .enumerate()
                        .map(|(j, x)| soft_threshold(*x, t * self.weight(j)))
                        .collect();
                    Ok(op.adjoint(&c))
                }
            },
            PriorKind::Tv1d => Ok(tv_prox(v, t)),
        }
    }

    /// `D_J^q(u, v) = J(u) - J(v) - <q, u - v>`. With `q = None` the canonical
    /// subgradient at `v` is used and the closed form is evaluated.
    pub fn bregman(&self, u: &[f64], v: &[f64], q: Option<&[f64]>) -> Result<BregmanEval> {
        check_dim("bregman u", self.n, u.len())?;
        check_dim("bregman v", self.n, v.len())?;
        if let Some(q) = q {
            check_dim("bregman q", self.n, q.len())?;
            let value = self.energy(u) - self.energy(v) - dot(q, &sub(u, v));
            return Ok(BregmanEval {
                value,
                subgradient_used: q.to_vec(),
            });
        }
        let value = match &self.kind {
            PriorKind::Gaussian { beta, .. } => {
                let c = self.coefficients(&sub(u, v));
                beta / (2.0 * self.lambda) * dot(&c, &c)
            }
            _ => {
                let cu = self.coefficients(u);
                let cv = self.coefficients(v);
                cu.iter()
                    .zip(&cv)
                    .enumerate()
                    .map(|(j, (a, b))| self.weight(j) * (sign0(*a) - sign0(*b)) * a)
                    .sum()
            }
        };
        Ok(BregmanEval {
            value,
            subgradient_used: self.subgradient(v),
        })
    }

    /// Fast path: canonical Bregman value only.
    pub fn bregman_value(&self, u: &[f64], v: &[f64]) -> f64 {
        self.bregman(u, v, None).map(|b| b.value).unwrap_or(f64::NAN)
    }
}
