//! Exact sampling from one-dimensional densities
//! `p(t) ∝ exp(-(a t² + b t) - Σ_k c_k |t - d_k|)`, `a > 0`, `c_k ≥ 0`.
//!
//! Between consecutive kinks the density is a Gaussian restricted to an
//! interval. A piece is chosen by its (log-space) probability mass and a
//! truncated normal is drawn inside it.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// `ln P(Z > x)` for standard normal `Z`, accurate far into the upper tail.
pub fn log_normal_sf(x: f64) -> f64 {
    if x < 30.0 {
        (0.5 * erfc(x / SQRT_2)).ln()
    } else {
        // asymptotic series of the Mills ratio
        let x2 = x * x;
        let series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2) + 105.0 / (x2 * x2 * x2 * x2);
        -0.5 * x2 - (x * (2.0 * std::f64::consts::PI).sqrt()).ln() + series.ln()
    }
}

fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Inverse of the upper tail: `P(Z > z) = p`.
fn normal_isf(p: f64) -> f64 {
    SQRT_2 * erfc_inv(2.0 * p)
}

/// `ln P(alpha < Z < beta)`.
pub fn log_normal_interval(alpha: f64, beta: f64) -> f64 {
    debug_assert!(alpha <= beta);
    if alpha >= 0.0 {
        let la = log_normal_sf(alpha);
        let lb = log_normal_sf(beta);
        la + (-(lb - la).exp()).ln_1p()
    } else if beta <= 0.0 {
        log_normal_interval(-beta, -alpha)
    } else {
        (1.0 - normal_sf(-alpha) - normal_sf(beta)).ln()
    }
}

/// Standard normal restricted to `[alpha, beta]`.
pub fn sample_truncated_std<R: Rng + ?Sized>(alpha: f64, beta: f64, rng: &mut R) -> f64 {
    if alpha == f64::NEG_INFINITY && beta == f64::INFINITY {
        return StandardNormal.sample(rng);
    }
    if beta <= 0.0 {
        return -sample_truncated_std(-beta, -alpha, rng);
    }
    let z = if alpha >= 0.0 {
        if alpha < 25.0 {
            let qa = normal_sf(alpha);
            let qb = normal_sf(beta);
            let u: f64 = rng.random();
            normal_isf(qb + u * (qa - qb))
        } else {
            tail_rejection(alpha, beta, rng)
        }
    } else {
        // straddles zero: invert on whichever side of the median the draw lands
        let qa = normal_sf(-alpha);
        let qb = normal_sf(beta);
        let mass = 1.0 - qa - qb;
        let v = rng.random::<f64>() * mass;
        let lower = 0.5 - qa;
        if v < lower {
            -normal_isf(qa + v)
        } else {
            normal_isf(qb + (mass - v))
        }
    };
    z.clamp(alpha, beta)
}

/// Far upper tail `alpha ≥ 25`: exponential proposals (or uniform ones when
/// the interval is short compared to `1/alpha`).
fn tail_rejection<R: Rng + ?Sized>(alpha: f64, beta: f64, rng: &mut R) -> f64 {
    let width = beta - alpha;
    if alpha * width < 1.0 {
        loop {
            let z = alpha + width * rng.random::<f64>();
            let u: f64 = rng.random();
            if u.ln() <= 0.5 * (alpha * alpha - z * z) {
                return z;
            }
        }
    }
    loop {
        let e: f64 = Exp1.sample(rng);
        let z = alpha + e / alpha;
        if z > beta {
            continue;
        }
        let u: f64 = rng.random();
        if u.ln() <= -0.5 * (z - alpha) * (z - alpha) {
            return z;
        }
    }
}

/// Reusable sampler for piecewise-Gaussian conditionals; keeps scratch
/// buffers so the hot loop does not allocate.
#[derive(Default, Clone, Debug)]
pub struct PiecewiseGaussian {
    kinks: Vec<(f64, f64)>,
    log_mass: Vec<f64>,
}

impl PiecewiseGaussian {
    pub fn new() -> Self {
        Self::default()
    }

    /// Energy `a t² + b t + Σ c|t - d|`.
    pub fn energy(a: f64, b: f64, kinks: &[(f64, f64)], t: f64) -> f64 {
        a * t * t + b * t + kinks.iter().map(|(d, c)| c * (t - d).abs()).sum::<f64>()
    }

    /// Draws one sample; `kinks` holds `(d_k, c_k)` pairs.
    pub fn sample<R: Rng + ?Sized>(&mut self, a: f64, b: f64, kinks: &[(f64, f64)], rng: &mut R) -> Result<f64> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::NonNormalizable { index: usize::MAX, a });
        }
        self.kinks.clear();
        self.kinks.extend(kinks.iter().copied().filter(|k| k.1 != 0.0));
        self.kinks.sort_by(|x, y| x.0.total_cmp(&y.0));
        self.kinks.dedup_by(|next, prev| {
            if next.0 == prev.0 {
                prev.1 += next.1;
                true
            } else {
                false
            }
        });

        let s = (0.5 / a).sqrt();
        let pieces = self.kinks.len() + 1;
        // t below every kink: each |t - d| = d - t
        let mut slope = b - self.kinks.iter().map(|k| k.1).sum::<f64>();
        let mut offset: f64 = self.kinks.iter().map(|k| k.1 * k.0).sum();
        self.log_mass.clear();
        let mut best = f64::NEG_INFINITY;
        for i in 0..pieces {
            let lo = if i == 0 { f64::NEG_INFINITY } else { self.kinks[i - 1].0 };
            let hi = if i == pieces - 1 { f64::INFINITY } else { self.kinks[i].0 };
            let mean = -slope / (2.0 * a);
            let floor = offset - slope * slope / (4.0 * a);
            let lm = -floor + log_normal_interval((lo - mean) / s, (hi - mean) / s);
            best = best.max(lm);
            self.log_mass.push(lm);
            if i < pieces - 1 {
                let (d, c) = self.kinks[i];
                slope += 2.0 * c;
                offset -= 2.0 * c * d;
            }
        }
        let total: f64 = self.log_mass.iter().map(|l| (l - best).exp()).sum();
        let mut pick = rng.random::<f64>() * total;
        let mut chosen = pieces - 1;
        for (i, l) in self.log_mass.iter().enumerate() {
            let w = (l - best).exp();
            if pick < w {
                chosen = i;
                break;
            }
            pick -= w;
        }
        // recover that piece's slope
        let mut slope = b - self.kinks.iter().map(|k| k.1).sum::<f64>();
        for k in &self.kinks[..chosen] {
            slope += 2.0 * k.1;
        }
        let lo = if chosen == 0 { f64::NEG_INFINITY } else { self.kinks[chosen - 1].0 };
        let hi = if chosen == pieces - 1 { f64::INFINITY } else { self.kinks[chosen].0 };
        let mean = -slope / (2.0 * a);
        let z = sample_truncated_std((lo - mean) / s, (hi - mean) / s, rng);
        Ok((mean + s * z).clamp(lo, hi))
    }
}
