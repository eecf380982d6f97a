use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::noise::GaussianNoiseModel;
use crate::operators::Operator;
use crate::posterior::Posterior;
use crate::priors::Prior;
use crate::sampler::{batch_means_stderr, Chain, DEFAULT_BATCHES};
use crate::vecops::{dist_inf, dot, sub};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CostKind {
    Ls,
    Bregman,
    Mse,
    Uniform,
}

/// A cost function `Ψ(u, û)`.
#[derive(Clone)]
pub struct CostSpec {
    kind: CostKind,
    forward: Option<(Operator, GaussianNoiseModel)>,
    l: Option<Operator>,
    beta: f64,
    prior: Option<Prior>,
    delta: f64,
}

impl std::fmt::Debug for CostSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "CostSpec({:?}, beta={}, delta={})", self.kind, self.beta, self.delta)
    }
}

impl CostSpec {
    /// `Ψ_LS = |K(û - u)|²_{Σ^{-1}} + β |L(û - u)|²`; `forward = None` drops the
    /// output-space term, `l = None` means `L = I`.
    pub fn ls(forward: Option<(Operator, GaussianNoiseModel)>, l: Option<Operator>, beta: f64) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be >= 0, got {beta}")));
        }
        if let Some(l) = &l {
            check_dim("cost L", l.in_dim(), l.out_dim())?;
        }
        Ok(Self {
            kind: CostKind::Ls,
            forward,
            l,
            beta,
            prior: None,
            delta: 0.0,
        })
    }

    /// `Ψ_Brg = |K(û - u)|²_{Σ^{-1}} + 2λ D_J(û, u)`.
    pub fn bregman(forward: Option<(Operator, GaussianNoiseModel)>, prior: Prior) -> Self {
        Self {
            kind: CostKind::Bregman,
            forward,
            l: None,
            beta: 0.0,
            prior: Some(prior),
            delta: 0.0,
        }
    }

    /// Squared error `|û - u|²`.
    pub fn mse() -> Self {
        Self {
            kind: CostKind::Mse,
            forward: None,
            l: None,
            beta: 1.0,
            prior: None,
            delta: 0.0,
        }
    }

    /// 0-1 loss on the sup-norm ball of radius `delta`.
    pub fn uniform(delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
        }
        Ok(Self {
            kind: CostKind::Uniform,
            forward: None,
            l: None,
            beta: 0.0,
            prior: None,
            delta,
        })
    }

    /// Ψ_LS with the posterior's forward model.
    pub fn ls_for(post: &Posterior, l: Option<Operator>, beta: f64) -> Result<Self> {
        Self::ls(Some((post.operator().clone(), post.noise().clone())), l, beta)
    }

    /// Ψ_Brg with the posterior's forward model and prior.
    pub fn bregman_for(post: &Posterior) -> Self {
        Self::bregman(Some((post.operator().clone(), post.noise().clone())), post.prior().clone())
    }

    pub fn kind(&self) -> CostKind {
        self.kind
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn l(&self) -> Option<&Operator> {
        self.l.as_ref()
    }

    pub fn prior(&self) -> Option<&Prior> {
        self.prior.as_ref()
    }

    pub fn forward(&self) -> Option<&(Operator, GaussianNoiseModel)> {
        self.forward.as_ref()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub(crate) fn output_term(&self, diff: &[f64]) -> f64 {
        match &self.forward {
            Some((k, noise)) => noise.weighted_sq_norm_unchecked(&k.apply(diff)),
            None => 0.0,
        }
    }

    pub(crate) fn l_term(&self, diff: &[f64]) -> f64 {
        match &self.l {
            Some(l) => {
                let v = l.apply(diff);
                dot(&v, &v)
            }
            None => dot(diff, diff),
        }
    }

    fn check(&self, u: &[f64], uhat: &[f64]) -> Result<()> {
        check_dim("cost: estimate", u.len(), uhat.len())?;
        if let Some((k, _)) = &self.forward {
            check_dim("cost: operator", k.in_dim(), u.len())?;
        }
        if let Some(p) = &self.prior {
            check_dim("cost: prior", p.dim(), u.len())?;
        }
        Ok(())
    }

    /// `Ψ(u, û)` for any kind.
    pub fn eval(&self, u: &[f64], uhat: &[f64]) -> Result<f64> {
        self.check(u, uhat)?;
        Ok(match self.kind {
            CostKind::Ls => {
                let diff = sub(uhat, u);
                self.output_term(&diff) + self.beta * self.l_term(&diff)
            }
            CostKind::Mse => {
                let diff = sub(uhat, u);
                dot(&diff, &diff)
            }
            CostKind::Bregman => {
                let diff = sub(uhat, u);
                let prior = self.prior.as_ref().expect("bregman cost has a prior");
                self.output_term(&diff) + 2.0 * prior.lambda() * prior.bregman_value(uhat, u)
            }
            CostKind::Uniform => cost_uniform(u, uhat, self.delta),
        })
    }
}

pub fn cost_ls(u: &[f64], uhat: &[f64], spec: &CostSpec) -> Result<f64> {
    if spec.kind != CostKind::Ls && spec.kind != CostKind::Mse {
        return Err(Error::InvalidParameter(format!("cost_ls called with a {:?} spec", spec.kind)));
    }
    spec.eval(u, uhat)
}

pub fn cost_bregman(u: &[f64], uhat: &[f64], spec: &CostSpec) -> Result<f64> {
    if spec.kind != CostKind::Bregman {
        return Err(Error::InvalidParameter(format!("cost_bregman called with a {:?} spec", spec.kind)));
    }
    spec.eval(u, uhat)
}

/// 0 inside the closed sup-norm ball of radius `delta`, 1 outside.
pub fn cost_uniform(u: &[f64], uhat: &[f64], delta: f64) -> f64 {
    if dist_inf(u, uhat) <= delta {
        0.0
    } else {
        1.0
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CostReport {
    pub estimate_cost: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

/// Posterior expected cost of `uhat`, estimated over the chain.
pub fn mc_bayes_cost(chain: &Chain, uhat: &[f64], spec: &CostSpec) -> Result<CostReport> {
    if chain.is_empty() {
        return Err(Error::NotEnoughSamples { have: 0, need: 1 });
    }
    check_dim("mc_bayes_cost: estimate", chain.dim(), uhat.len())?;
    let costs: Vec<f64> = chain.iter().map(|u| spec.eval(u, uhat)).collect::<Result<_>>()?;
    let (mean, se) = scalar_mean_stderr(&costs)?;
    Ok(CostReport {
        estimate_cost: mean,
        stderr: se,
        n_samples: chain.len(),
    })
}

/// Mean and batch-means stderr of a scalar series.
pub(crate) fn scalar_mean_stderr(values: &[f64]) -> Result<(f64, f64)> {
    let batches = DEFAULT_BATCHES.min(values.len());
    let (m, s) = batch_means_stderr(values.chunks(1), 1, batches)?;
    Ok((m[0], s[0]))
}

/// Chain-precomputed cost evaluation for many candidates: `K u_k`, `L u_k`
/// and prior terms are computed once, so each candidate costs O(N (m + n)).
pub struct CostEvaluator<'a> {
    spec: &'a CostSpec,
    chain: &'a Chain,
    k_samples: Vec<Vec<f64>>,
    l_samples: Vec<Vec<f64>>,
    sub_samples: Vec<Vec<f64>>,
    energy_samples: Vec<f64>,
}

impl<'a> CostEvaluator<'a> {
    pub fn new(chain: &'a Chain, spec: &'a CostSpec) -> Result<Self> {
        if spec.kind == CostKind::Uniform {
            return Ok(Self {
                spec,
                chain,
                k_samples: Vec::new(),
                l_samples: Vec::new(),
                sub_samples: Vec::new(),
                energy_samples: Vec::new(),
            });
        }
        let k_samples = match &spec.forward {
            Some((k, _)) if spec.kind != CostKind::Mse => chain.iter().map(|u| k.apply(u)).collect(),
            _ => Vec::new(),
        };
        let l_samples = match (&spec.l, spec.kind) {
            (Some(l), CostKind::Ls) => chain.iter().map(|u| l.apply(u)).collect(),
            _ => Vec::new(),
        };
        let (sub_samples, energy_samples) = match (&spec.prior, spec.kind) {
            (Some(p), CostKind::Bregman) => (chain.iter().map(|u| p.subgradient(u)).collect(), chain.iter().map(|u| p.energy(u)).collect()),
            _ => (Vec::new(), Vec::new()),
        };
        Ok(Self {
            spec,
            chain,
            k_samples,
            l_samples,
            sub_samples,
            energy_samples,
        })
    }

    /// Per-sample costs `Ψ(u_k, û)`.
    pub fn costs(&self, uhat: &[f64]) -> Result<Vec<f64>> {
        check_dim("cost evaluator: estimate", self.chain.dim(), uhat.len())?;
        let spec = self.spec;
        if spec.kind == CostKind::Uniform {
            return Ok(self.chain.iter().map(|u| cost_uniform(u, uhat, spec.delta)).collect());
        }
        let k_hat = match &spec.forward {
            Some((k, _)) if spec.kind != CostKind::Mse => Some(k.apply(uhat)),
            _ => None,
        };
        let l_hat = match (&spec.l, spec.kind) {
            (Some(l), CostKind::Ls) => Some(l.apply(uhat)),
            _ => None,
        };
        let j_hat = spec.prior.as_ref().map(|p| p.energy(uhat));
        let mut out = Vec::with_capacity(self.chain.len());
        for (k, u) in self.chain.iter().enumerate() {
            let mut c = 0.0;
            if let (Some(kh), Some((_, noise))) = (&k_hat, &spec.forward) {
                let diff = sub(kh, &self.k_samples[k]);
                c += noise.weighted_sq_norm_unchecked(&diff);
            }
            match spec.kind {
                CostKind::Ls => {
                    let sq = match &l_hat {
                        Some(lh) => {
                            let d = sub(lh, &self.l_samples[k]);
                            dot(&d, &d)
                        }
                        None => {
                            let d = sub(uhat, u);
                            dot(&d, &d)
                        }
                    };
                    c += spec.beta * sq;
                }
                CostKind::Mse => {
                    let d = sub(uhat, u);
                    c += dot(&d, &d);
                }
                CostKind::Bregman => {
                    let p = spec.prior.as_ref().unwrap();
                    let q = &self.sub_samples[k];
                    let d = j_hat.unwrap() - self.energy_samples[k] - dot(q, &sub(uhat, u));
                    c += 2.0 * p.lambda() * d;
                }
                CostKind::Uniform => unreachable!(),
            }
            out.push(c);
        }
        Ok(out)
    }

    pub fn report(&self, uhat: &[f64]) -> Result<CostReport> {
        let costs = self.costs(uhat)?;
        let (mean, se) = scalar_mean_stderr(&costs)?;
        Ok(CostReport {
            estimate_cost: mean,
            stderr: se,
            n_samples: costs.len(),
        })
    }
}
