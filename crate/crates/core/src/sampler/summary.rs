use serde::Serialize;

use super::Chain;
use crate::error::{Error, Result};
use crate::grid::Signal;
use crate::posterior::Posterior;
use crate::priors::Prior;
use crate::vecops::{norm2, norm_inf, sub};

pub const DEFAULT_BATCHES: usize = 32;
pub const MIN_BATCHES: usize = 20;

/// Running batch-means accumulator for a vector-valued series.
pub(crate) struct BatchMeans {
    dim: usize,
    count: usize,
    batches: usize,
    batch_size: usize,
    skip: usize,
    seen: usize,
    /// running mean of everything pushed so far
    total: Vec<f64>,
    current: Vec<f64>,
    batch_means: Vec<Vec<f64>>,
}

impl BatchMeans {
    /// `count` values will be pushed. The first `count mod batches` values
    /// enter the mean but not the batches.
    pub fn new(dim: usize, count: usize, batches: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::NotEnoughSamples { have: 0, need: 1 });
        }
        if batches == 0 || count < batches {
            return Err(Error::NotEnoughSamples { have: count, need: batches.max(1) });
        }
        let batch_size = count / batches;
        Ok(Self {
            dim,
            count,
            batches,
            batch_size,
            skip: count - batch_size * batches,
            seen: 0,
            total: vec![0.0; dim],
            current: vec![0.0; dim],
            batch_means: Vec::with_capacity(batches),
        })
    }

    pub fn push(&mut self, v: &[f64]) {
        debug_assert_eq!(v.len(), self.dim);
        // running mean: exact for constant series
        let k = (self.seen + 1) as f64;
        for (t, x) in self.total.iter_mut().zip(v) {
            *t += (x - *t) / k;
        }
        if self.seen >= self.skip {
            let pos = (self.seen - self.skip) % self.batch_size + 1;
            for (c, x) in self.current.iter_mut().zip(v) {
                *c += (x - *c) / pos as f64;
            }
            if pos == self.batch_size {
                self.batch_means.push(std::mem::replace(&mut self.current, vec![0.0; self.dim]));
            }
        }
        self.seen += 1;
    }

    /// `(mean, stderr of the mean)`.
    pub fn finish(self) -> (Vec<f64>, Vec<f64>) {
        assert_eq!(self.seen, self.count, "batch means: pushed count mismatch");
        let mean = self.total;
        let b = self.batches as f64;
        let mut stderr = vec![0.0; self.dim];
        if self.batches > 1 {
            let mut bm_mean = vec![0.0; self.dim];
            for (k, m) in self.batch_means.iter().enumerate() {
                for (a, x) in bm_mean.iter_mut().zip(m) {
                    *a += (x - *a) / (k + 1) as f64;
                }
            }
            for m in &self.batch_means {
                for ((s, x), c) in stderr.iter_mut().zip(m).zip(&bm_mean) {
                    *s += (x - c) * (x - c);
                }
            }
            stderr.iter_mut().for_each(|s| *s = (*s / (b - 1.0) / b).sqrt());
        }
        (mean, stderr)
    }
}

/// Batch-means standard error of the mean of a vector-valued series.
pub fn batch_means_stderr<'a>(
    series: impl ExactSizeIterator<Item = &'a [f64]>,
    dim: usize,
    batches: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut acc = BatchMeans::new(dim, series.len(), batches)?;
    for v in series {
        acc.push(v);
    }
    Ok(acc.finish())
}

/// Batch count used for a chain of `len` samples: the default when possible;
/// chains shorter than the minimum fall back to one sample per batch.
fn batches_for(len: usize) -> usize {
    if len >= DEFAULT_BATCHES {
        DEFAULT_BATCHES
    } else {
        if len < MIN_BATCHES {
            log::warn!("chain of {len} samples is too short for batch means; using one-sample batches");
        }
        len
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainSummary {
    #[serde(skip)]
    pub mean: Signal,
    pub stderr: Vec<f64>,
    /// Mean of the canonical prior subgradient over the chain.
    pub subgradient_mean: Vec<f64>,
    pub subgradient_stderr: Vec<f64>,
    pub n_samples: usize,
    pub n_batches: usize,
}

pub fn summarize(chain: &Chain, prior: &Prior) -> Result<ChainSummary> {
    summarize_with_batches(chain, prior, batches_for(chain.len()))
}

pub fn summarize_with_batches(chain: &Chain, prior: &Prior, batches: usize) -> Result<ChainSummary> {
    if chain.dim() != prior.dim() {
        return Err(Error::DimensionMismatch {
            context: "summarize: prior",
            expected: chain.dim(),
            actual: prior.dim(),
        });
    }
    let n = chain.dim();
    let mut um = BatchMeans::new(n, chain.len(), batches)?;
    let mut qm = BatchMeans::new(n, chain.len(), batches)?;
    for s in chain.iter() {
        um.push(s);
        qm.push(&prior.subgradient(s));
    }
    let (mean, stderr) = um.finish();
    let (subgradient_mean, subgradient_stderr) = qm.finish();
    Ok(ChainSummary {
        mean: Signal::new(*chain.grid(), mean)?,
        stderr,
        subgradient_mean,
        subgradient_stderr,
        n_samples: chain.len(),
        n_batches: batches,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Discrepancy {
    pub sup_norm: f64,
    /// `|mean(a) - mean(b)| / (½|mean(a) + mean(b)|)`.
    pub rel_l2: f64,
    /// `3 max_i sqrt(se_a,i² + se_b,i²)`.
    pub stderr_bound: f64,
}

pub fn two_chain_discrepancy(a: &Chain, b: &Chain) -> Result<Discrepancy> {
    if a.grid() != b.grid() {
        return Err(Error::InvalidGrid("chains live on different grids".into()));
    }
    let n = a.dim();
    let (ma, sa) = batch_means_stderr(a.iter(), n, batches_for(a.len()))?;
    let (mb, sb) = batch_means_stderr(b.iter(), n, batches_for(b.len()))?;
    let diff = sub(&ma, &mb);
    let avg: Vec<f64> = ma.iter().zip(&mb).map(|(x, y)| 0.5 * (x + y)).collect();
    let scale = norm2(&avg);
    let bound = sa.iter().zip(&sb).map(|(x, y)| (x * x + y * y).sqrt()).fold(0.0, f64::max);
    Ok(Discrepancy {
        sup_norm: norm_inf(&diff),
        rel_l2: if scale > 0.0 { norm2(&diff) / scale } else { norm2(&diff) },
        stderr_bound: 3.0 * bound,
    })
}

/// The posterior-averaged optimality condition
/// `K^T Σ^{-1}(K û_CM - f) + λ p̂_CM = 0`, with its Monte Carlo error.
#[derive(Clone, Debug, Serialize)]
pub struct AverageOptimality {
    pub sup_residual: f64,
    /// Largest componentwise batch-means stderr of the residual.
    pub sup_stderr: f64,
    /// Largest `|r_i| / se_i` over components.
    pub max_z: f64,
    pub passed: bool,
    #[serde(skip)]
    pub residual: Vec<f64>,
    #[serde(skip)]
    pub stderr: Vec<f64>,
}

/// The residual is linear in `(û_CM, p̂_CM)`, so it equals the chain average of
/// the per-sample gradient; its stderr is batch means on that series.
pub fn average_optimality(post: &Posterior, chain: &Chain) -> Result<AverageOptimality> {
    let n = post.dim();
    if chain.dim() != n {
        return Err(Error::DimensionMismatch {
            context: "average_optimality",
            expected: n,
            actual: chain.dim(),
        });
    }
    let mut acc = BatchMeans::new(n, chain.len(), batches_for(chain.len()))?;
    for s in chain.iter() {
        acc.push(&post.neg_log_posterior_gradient(s)?);
    }
    let (residual, stderr) = acc.finish();
    let sup_residual = norm_inf(&residual);
    let sup_stderr = stderr.iter().copied().fold(0.0, f64::max);
    let max_z = residual
        .iter()
        .zip(&stderr)
        .map(|(r, s)| if *s > 0.0 { r.abs() / s } else if *r == 0.0 { 0.0 } else { f64::INFINITY })
        .fold(0.0, f64::max);
    Ok(AverageOptimality {
        sup_residual,
        sup_stderr,
        max_z,
        passed: sup_residual <= 3.0 * sup_stderr,
        residual,
        stderr,
    })
}
