//! Independent numerical oracles shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use bregman_bayes::grid::{Grid, Signal};
use bregman_bayes::noise::GaussianNoiseModel;
use bregman_bayes::operators::{
    cell_average_restriction, gaussian_blur, haar_transform, interval_integration, radon, Composed, DenseMatrix, Diagonal,
    ForwardDifference, Identity, Operator, Zero,
};
use bregman_bayes::posterior::Posterior;
use bregman_bayes::priors::Prior;
use bregman_bayes::sampler::PiecewiseGaussian;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn simpson_step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fb) = (f(a), f(b));
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Integral over the union of `[breaks[i], breaks[i+1]]`, so kinks are never
/// inside a panel.
pub fn integrate_pieces(f: &dyn Fn(f64) -> f64, breaks: &[f64], tol: f64) -> f64 {
    breaks.windows(2).map(|w| integrate(f, w[0], w[1], tol)).sum()
}

/// Scalar posterior `exp(-(f - u)²/(2σ²) - λ|u|)` by quadrature.
#[derive(Clone, Copy, Debug)]
pub struct ScalarL1 {
    pub f: f64,
    pub sigma: f64,
    pub lambda: f64,
}

impl ScalarL1 {
    pub fn energy(&self, u: f64) -> f64 {
        (self.f - u).powi(2) / (2.0 * self.sigma * self.sigma) + self.lambda * u.abs()
    }

    /// Panel endpoints: a fine ruler over the effective support, with the kink
    /// at 0 always a break, so adaptive Simpson never sees a nearly-flat panel.
    fn breaks(&self) -> Vec<f64> {
        let w = 40.0 * self.sigma + 40.0 / self.lambda.max(1e-3);
        let (lo, hi) = (self.f.min(0.0) - w, self.f.max(0.0) + w);
        let h = 0.25 * self.sigma.min(1.0 / self.lambda.max(1e-3));
        let mut b: Vec<f64> = (0..=((hi - lo) / h).ceil() as usize).map(|i| lo + h * i as f64).collect();
        b.push(0.0);
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    /// Posterior expectation of `g`.
    pub fn expect(&self, g: &dyn Fn(f64) -> f64) -> f64 {
        let e0 = self.energy(self.f - self.lambda * self.sigma * self.sigma * self.f.signum());
        let rho = |u: f64| (e0 - self.energy(u)).exp();
        let z = integrate_pieces(&rho, &self.breaks(), 1e-13);
        let breaks = self.breaks();
        integrate_pieces(&|u| g(u) * rho(u), &breaks, 1e-13) / z
    }

    pub fn mean(&self) -> f64 {
        self.expect(&|u| u)
    }

    pub fn posterior(&self) -> Posterior {
        let g = Grid::new_1d(1).unwrap();
        Posterior::new(
            g,
            Arc::new(Identity::new(1)),
            Signal::new(g, vec![self.f]).unwrap(),
            GaussianNoiseModel::from_sigma(1, self.sigma).unwrap(),
            Prior::l1(1, self.lambda, None).unwrap(),
        )
        .unwrap()
    }
}

/// The scalar problem `f = 2, K = 1, σ = 1, λ = 0.5`, whose MAP is 1.5.
pub const SCALAR: ScalarL1 = ScalarL1 {
    f: 2.0,
    sigma: 1.0,
    lambda: 0.5,
};
/// `β` of the least-squares cost used with [`SCALAR`].
pub const BETA: f64 = 0.5;

pub fn brute_force_map(p: &ScalarL1) -> f64 {
    // two-level grid search over [-5, 5]
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=1_000_000 {
        let u = -5.0 + 1e-5 * i as f64;
        let e = p.energy(u);
        if e < best.0 {
            best = (e, u);
        }
    }
    let c = best.1;
    for i in 0..=200_000 {
        let u = c - 1e-5 + 1e-10 * i as f64;
        let e = p.energy(u);
        if e < best.0 {
            best = (e, u);
        }
    }
    best.1
}

pub fn psi_brg(p: &ScalarL1, u: f64, uh: f64) -> f64 {
    let s = p.sigma;
    let sign = if u > 0.0 {
        1.0
    } else if u < 0.0 {
        -1.0
    } else {
        0.0
    };
    (uh - u).powi(2) / (s * s) + 2.0 * p.lambda * (uh.abs() - sign * uh)
}

pub fn psi_ls(p: &ScalarL1, u: f64, uh: f64) -> f64 {
    let s = p.sigma;
    (uh - u).powi(2) / (s * s) + BETA * (uh - u).powi(2)
}

pub fn random_dense(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    DenseMatrix::new(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Random `m × n` problem `f = K u₀ + ε` with `σ = noise`.
pub fn random_problem(n: usize, m: usize, noise: f64, prior: Prior, seed: u64) -> Posterior {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = random_dense(m, n, &mut rng);
    let u0: Vec<f64> = (0..n).map(|i| if i % 3 == 0 { rng.random_range(-2.0..2.0) } else { 0.0 }).collect();
    let kd: Operator = Arc::new(k);
    let mut f = kd.apply(&u0);
    for v in f.iter_mut() {
        *v += noise * rng.random_range(-1.7..1.7);
    }
    Posterior::new(
        Grid::new_1d(n).unwrap(),
        kd,
        Signal::new(Grid::new_1d(m).unwrap(), f).unwrap(),
        GaussianNoiseModel::from_sigma(m, noise).unwrap(),
        prior,
    )
    .unwrap()
}

/// Asymptotic Kolmogorov survival function `P(√n D > x)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Kolmogorov-Smirnov distance between `samples` and the distribution with
/// unnormalized density `exp(-energy)` with the given kinks. The CDF is
/// integrated piecewise between consecutive order statistics.
pub fn ks_distance(samples: &mut [f64], energy: &dyn Fn(f64) -> f64, kinks: &[f64]) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    let (lo, hi) = (samples[0], samples[n - 1]);
    // locate a reference energy to avoid underflow
    let e_ref = samples.iter().step_by(97).map(|s| energy(*s)).fold(f64::INFINITY, f64::min);
    let rho = |t: f64| (e_ref - energy(t)).exp();
    let with_kinks = |a: f64, b: f64| -> f64 {
        let mut pts = vec![a];
        pts.extend(kinks.iter().copied().filter(|k| *k > a && *k < b));
        pts.push(b);
        pts.windows(2).map(|w| integrate(&rho, w[0], w[1], 1e-14)).sum()
    };
    let span = hi - lo + 1.0;
    // tails on geometrically growing panels out to 50 spans
    let tail = |edge: f64, dir: f64| -> f64 {
        let mut total = 0.0;
        let mut w = 1e-3 * span;
        let mut x = edge;
        while w < 50.0 * span {
            let y = x + dir * w;
            total += if dir < 0.0 { with_kinks(y, x) } else { with_kinks(x, y) };
            x = y;
            w *= 2.0;
        }
        total
    };
    let left = tail(lo, -1.0);
    let right = tail(hi, 1.0);
    let mut cum = vec![left];
    for w in samples.windows(2) {
        let last = *cum.last().unwrap();
        cum.push(last + with_kinks(w[0], w[1]));
    }
    let z = cum[n - 1] + right;
    let mut d: f64 = 0.0;
    for (i, c) in cum.iter().enumerate() {
        let f = c / z;
        d = d.max((i + 1) as f64 / n as f64 - f).max(f - i as f64 / n as f64);
    }
    d
}

fn prox_objective(p: &Prior, x: &[f64], v: &[f64], t: f64) -> f64 {
    let d: f64 = x.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum();
    0.5 * d + t * p.energy(x)
}

/// Exact 1D TV prox by enumerating the sign pattern of the differences: for
/// a fixed pattern the minimizer is piecewise constant on the zero runs.
pub fn tv_prox_bruteforce(v: &[f64], t: f64) -> Vec<f64> {
    let n = v.len();
    let m = n - 1;
    let prior = Prior::tv1d(n, 1.0).unwrap();
    let mut best = v.to_vec();
    let mut best_val = f64::INFINITY;
    for code in 0..3usize.pow(m as u32) {
        let mut s = vec![0.0; m];
        let mut c = code;
        for sk in s.iter_mut() {
            *sk = (c % 3) as f64 - 1.0;
            c /= 3;
        }
        let mut w = v.to_vec();
        for k in 0..m {
            w[k] += t * s[k];
            w[k + 1] -= t * s[k];
        }
        let mut x = vec![0.0; n];
        let mut start = 0;
        for i in 0..n {
            if i == n - 1 || s[i] != 0.0 {
                let mean = w[start..=i].iter().sum::<f64>() / (i + 1 - start) as f64;
                x[start..=i].iter_mut().for_each(|e| *e = mean);
                start = i + 1;
            }
        }
        let val = prox_objective(&prior, &x, v, t);
        if val < best_val {
            best_val = val;
            best = x;
        }
    }
    best
}

/// Exact prox of an ℓ1 prior on orthonormal coefficients `W` (dense) by
/// enumerating supports and signs, scored in the pixel domain.
pub fn l1_prox_bruteforce(p: &Prior, w: &DenseMatrix, v: &[f64], t: f64) -> Vec<f64> {
    let n = v.len();
    let wv: Vec<f64> = (0..n).map(|i| (0..n).map(|j| w.get(i, j) * v[j]).sum()).collect();
    let weights = p.coefficient_weights();
    let mut best = v.to_vec();
    let mut best_val = f64::INFINITY;
    for code in 0..3usize.pow(n as u32) {
        let mut c = vec![0.0; n];
        let mut k = code;
        for j in 0..n {
            let s = (k % 3) as f64 - 1.0;
            k /= 3;
            if s != 0.0 {
                c[j] = wv[j] - t * weights[j] * s;
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (0..n).map(|j| w.get(j, i) * c[j]).sum()).collect();
        let val = prox_objective(p, &x, v, t);
        if val < best_val {
            best_val = val;
            best = x;
        }
    }
    best
}

/// One instance of every operator family, including composites.
pub fn all_operators() -> Vec<Operator> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let dense = DenseMatrix::new(5, 7, (0..35).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let g2 = Grid::square(16).unwrap();
    let blur: Operator = Arc::new(gaussian_blur(g2, 0.05).unwrap());
    vec![
        Arc::new(Identity::new(6)),
        Arc::new(Zero::new(3, 4)),
        Arc::new(Diagonal::new(vec![1.0, -2.0, 0.5])),
        Arc::new(dense),
        Arc::new(ForwardDifference::new(9)),
        Arc::new(gaussian_blur(Grid::new_1d(40).unwrap(), 0.03).unwrap()),
        blur.clone(),
        Arc::new(gaussian_blur(Grid::new_2d(8, 12).unwrap(), 0.1).unwrap()),
        Arc::new(haar_transform(Grid::new_1d(32).unwrap(), 5).unwrap()),
        Arc::new(haar_transform(g2, 2).unwrap()),
        Arc::new(haar_transform(g2, 4).unwrap()),
        Arc::new(cell_average_restriction(Grid::square(32).unwrap(), g2).unwrap()),
        Arc::new(cell_average_restriction(Grid::new_1d(12).unwrap(), Grid::new_1d(4).unwrap()).unwrap()),
        Arc::new(interval_integration(63, 32).unwrap()),
        Arc::new(interval_integration(1000, 7).unwrap()),
        Arc::new(radon(g2, 15, 23).unwrap()),
        Arc::new(radon(Grid::square(64).unwrap(), 15, 95).unwrap()),
        Arc::new(Composed::new(Arc::new(radon(g2, 4, 9).unwrap()), blur).unwrap()),
    ]
}

#[derive(Debug)]
pub struct KsOutcome {
    pub worst_distance: f64,
    pub worst_p: f64,
    pub failures: Vec<String>,
}

/// KS tests of the exact conditional sampler on `count` random
/// piecewise-Gaussian conditionals with up to four kinks.
pub fn ks_random_conditionals(count: usize, draws: usize, seed: u64, significance: f64) -> KsOutcome {
    let mut gen = ChaCha8Rng::seed_from_u64(seed);
    let mut pg = PiecewiseGaussian::new();
    let mut out = KsOutcome {
        worst_distance: 0.0,
        worst_p: 1.0,
        failures: Vec::new(),
    };
    for case in 0..count {
        let a: f64 = gen.random_range(0.05..5.0);
        let b: f64 = gen.random_range(-5.0..5.0);
        let n_kinks = gen.random_range(0..=4);
        let kinks: Vec<(f64, f64)> = (0..n_kinks).map(|_| (gen.random_range(-3.0..3.0), gen.random_range(0.0..6.0))).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(case as u64));
        let (d, p) = ks_conditional(&mut pg, a, b, &kinks, draws, &mut rng);
        if p < out.worst_p {
            out.worst_distance = d;
            out.worst_p = p;
        }
        if p < significance {
            out.failures.push(format!("case {case}: a={a} b={b} kinks={kinks:?} D={d:.3e} p={p:.3e}"));
        }
    }
    out
}

/// KS distance and p-value of `draws` samples of one conditional.
pub fn ks_conditional(pg: &mut PiecewiseGaussian, a: f64, b: f64, kinks: &[(f64, f64)], draws: usize, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let mut x: Vec<f64> = (0..draws).map(|_| pg.sample(a, b, kinks, rng).unwrap()).collect();
    let energy = |t: f64| PiecewiseGaussian::energy(a, b, kinks, t);
    let points: Vec<f64> = kinks.iter().map(|k| k.0).collect();
    let d = ks_distance(&mut x, &energy, &points);
    (d, kolmogorov_sf(d * (draws as f64).sqrt()))
}
