//! Posterior sampling: systematic-sweep Gibbs with exact piecewise-Gaussian
//! conditionals, and random-walk Metropolis.
//!
//! Randomness comes from ChaCha8 seeded with `seed`; chain `i` uses stream
//! `i`, so independent chains are reproducible and never share state.

mod chain;
pub mod conditional;
mod engine;
mod summary;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::posterior::Posterior;
use crate::priors::PriorKind;

pub use chain::{sidecar_path, Chain, SamplerMethod};
pub use conditional::PiecewiseGaussian;
pub use summary::{
    average_optimality, batch_means_stderr, summarize, summarize_with_batches, two_chain_discrepancy,
    AverageOptimality, ChainSummary, Discrepancy, DEFAULT_BATCHES, MIN_BATCHES,
};

use engine::Engine;

/// Sweeps between recomputations of the maintained residual.
const REFRESH_EVERY: usize = 64;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerOptions {
    /// Stored samples (after burn-in and thinning).
    pub n_samples: usize,
    /// Discarded sweeps; `None` means 10% of the stored sweeps.
    #[serde(default)]
    pub burn_in: Option<usize>,
    #[serde(default = "one")]
    pub thinning: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub chain_index: u64,
    /// Initial state; zeros when absent.
    #[serde(skip)]
    pub start: Option<Vec<f64>>,
}

fn one() -> usize {
    1
}

impl SamplerOptions {
    pub fn new(n_samples: usize, seed: u64) -> Self {
        Self {
            n_samples,
            burn_in: None,
            thinning: 1,
            seed,
            chain_index: 0,
            start: None,
        }
    }

    pub fn effective_burn_in(&self) -> usize {
        self.burn_in.unwrap_or((self.n_samples * self.thinning).div_ceil(10))
    }

    fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.chain_index);
        rng
    }

    fn validate(&self, dim: usize) -> Result<Vec<f64>> {
        if self.n_samples == 0 {
            return Err(Error::InvalidParameter("n_samples must be positive".into()));
        }
        if self.thinning == 0 {
            return Err(Error::InvalidParameter("thinning must be positive".into()));
        }
        match &self.start {
            Some(s) => {
                check_dim("sampler start", dim, s.len())?;
                Ok(s.clone())
            }
            None => Ok(vec![0.0; dim]),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RwmMode {
    /// One coordinate at a time, in the prior's orthonormal basis, with steps
    /// scaled by each coordinate's conditional width.
    Componentwise,
    /// Isotropic Gaussian proposal on the whole vector.
    FullVector,
}

fn run_sweeps(
    opts: &SamplerOptions,
    dim: usize,
    mut sweep: impl FnMut(&mut ChaCha8Rng) -> Result<()>,
    mut record: impl FnMut(&mut Vec<f64>),
) -> Result<Vec<f64>> {
    let mut rng = opts.rng();
    let burn_in = opts.effective_burn_in();
    let total = burn_in + opts.n_samples * opts.thinning;
    let mut samples = Vec::with_capacity(opts.n_samples * dim);
    for it in 0..total {
        sweep(&mut rng)?;
        if it >= burn_in && (it - burn_in) % opts.thinning == opts.thinning - 1 {
            record(&mut samples);
        }
    }
    Ok(samples)
}

/// Systematic-sweep single-component Gibbs sampler.
pub fn sample_gibbs(post: &Posterior, opts: &SamplerOptions) -> Result<Chain> {
    if let PriorKind::L1 { transform: Some(t), .. } = post.prior().kind() {
        return Err(Error::UnsupportedPrior(format!(
            "Gibbs sampling supports pixel-domain priors only, not l1 on {}",
            t.name()
        )));
    }
    let start = opts.validate(post.dim())?;
    let mut engine = Engine::new(post, &start, false)?;
    let mut cond = PiecewiseGaussian::new();
    let n = engine.dim();
    let engine_cell = std::cell::RefCell::new(&mut engine);
    let mut sweeps = 0usize;
    let samples = run_sweeps(
        opts,
        n,
        |rng| {
            let mut e = engine_cell.borrow_mut();
            for j in 0..n {
                let c = e.conditional(j);
                let t = cond
                    .sample(c.a, c.b, c.kinks(), rng)
                    .map_err(|_| Error::NonNormalizable { index: j, a: c.a })?;
                e.set(j, t);
            }
            sweeps += 1;
            if sweeps % REFRESH_EVERY == 0 {
                e.refresh();
            }
            Ok(())
        },
        |out| out.extend_from_slice(engine_cell.borrow().coords()),
    )?;
    Chain::new(
        *post.grid(),
        samples,
        opts.seed,
        opts.effective_burn_in(),
        opts.thinning,
        SamplerMethod::Gibbs,
        None,
    )
}

/// Random-walk Metropolis; `step` multiplies the proposal scale.
pub fn sample_rwm(post: &Posterior, opts: &SamplerOptions, step: f64, mode: RwmMode) -> Result<Chain> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidParameter(format!("rwm step must be positive, got {step}")));
    }
    let start = opts.validate(post.dim())?;
    let n = post.dim();
    let mut accepted = 0u64;
    let mut proposed = 0u64;
    let samples = match mode {
        RwmMode::Componentwise => {
            let mut engine = Engine::new(post, &start, true)?;
            let scales: Vec<f64> = (0..n).map(|j| step * engine.natural_scale(j)).collect();
            let engine_cell = std::cell::RefCell::new(&mut engine);
            let mut sweeps = 0usize;
            run_sweeps(
                opts,
                n,
                |rng| {
                    let mut e = engine_cell.borrow_mut();
                    for j in 0..n {
                        let c = e.conditional(j);
                        let cur = e.coords()[j];
                        let z: f64 = StandardNormal.sample(rng);
                        let prop = cur + scales[j] * z;
                        let log_ratio = c.energy(cur) - c.energy(prop);
                        let u: f64 = rng.random();
                        proposed += 1;
                        if u.ln() < log_ratio {
                            e.set(j, prop);
                            accepted += 1;
                        }
                    }
                    sweeps += 1;
                    if sweeps % REFRESH_EVERY == 0 {
                        e.refresh();
                    }
                    Ok(())
                },
                |out| out.extend(engine_cell.borrow().pixels()),
            )?
        }
        RwmMode::FullVector => {
            let mut u = start;
            let mut energy = post.neg_log_posterior(&u)?;
            let mut prop = vec![0.0; n];
            let state = std::cell::RefCell::new(&mut u);
            run_sweeps(
                opts,
                n,
                |rng| {
                    let mut cur = state.borrow_mut();
                    for (p, c) in prop.iter_mut().zip(cur.iter()) {
                        let z: f64 = StandardNormal.sample(rng);
                        *p = c + step * z;
                    }
                    let e_prop = post.neg_log_posterior(&prop)?;
                    let u: f64 = rng.random();
                    proposed += 1;
                    if u.ln() < energy - e_prop {
                        cur.copy_from_slice(&prop);
                        energy = e_prop;
                        accepted += 1;
                    }
                    Ok(())
                },
                |out| out.extend_from_slice(state.borrow().as_slice()),
            )?
        }
    };
    let rate = accepted as f64 / proposed.max(1) as f64;
    Chain::new(
        *post.grid(),
        samples,
        opts.seed,
        opts.effective_burn_in(),
        opts.thinning,
        SamplerMethod::Rwm,
        Some(rate),
    )
}
