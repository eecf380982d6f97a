use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::cost::{scalar_mean_stderr, CostEvaluator, CostSpec};
use crate::error::{check_dim, Error, Result};
use crate::map_solver::MapResult;
use crate::operators::Operator;
use crate::posterior::Posterior;
use crate::priors::Prior;
use crate::sampler::Chain;
use crate::vecops::{dot, norm2, sub};

pub const PROBE_SCALES: [f64; 3] = [0.1, 0.5, 1.0];

#[derive(Clone, Debug, Serialize)]
pub struct ProbeResult {
    pub scale: f64,
    pub probe: usize,
    /// Expected cost of the perturbed candidate.
    pub cost: f64,
    /// `cost(candidate) - cost(perturbed)`; positive means the perturbation wins.
    pub improvement: f64,
    /// Stderr of the paired difference.
    pub stderr: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct OptimalityReport {
    pub candidate_cost: f64,
    pub candidate_stderr: f64,
    pub n_samples: usize,
    pub probes: Vec<ProbeResult>,
    pub failures: usize,
    pub passed: bool,
}

/// Random unit direction (a sign for n = 1).
fn unit_direction(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let norm = norm2(&v);
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Local certification of a Bayes estimator: the candidate's Monte Carlo
/// expected cost must not be beaten by more than 3 paired stderr by any of
/// `n_probes` random perturbations at each scale `PROBE_SCALES × probe_scale`.
pub fn verify_bayes_optimality(
    chain: &Chain,
    candidate: &[f64],
    spec: &CostSpec,
    n_probes: usize,
    probe_scale: f64,
    seed: u64,
) -> Result<OptimalityReport> {
    check_dim("verify_bayes_optimality: candidate", chain.dim(), candidate.len())?;
    if !(probe_scale > 0.0) {
        return Err(Error::InvalidParameter(format!("probe_scale must be positive, got {probe_scale}")));
    }
    let eval = CostEvaluator::new(chain, spec)?;
    let base = eval.costs(candidate)?;
    let (base_mean, base_se) = scalar_mean_stderr(&base)?;
    let mut probes = Vec::with_capacity(n_probes * PROBE_SCALES.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for probe in 0..n_probes {
        let dir = unit_direction(candidate.len(), &mut rng);
        for &s in &PROBE_SCALES {
            let moved: Vec<f64> = candidate.iter().zip(&dir).map(|(c, d)| c + s * probe_scale * d).collect();
            let costs = eval.costs(&moved)?;
            let diffs: Vec<f64> = base.iter().zip(&costs).map(|(a, b)| a - b).collect();
            let (improvement, se) = scalar_mean_stderr(&diffs)?;
            let cost = costs.iter().sum::<f64>() / costs.len() as f64;
            probes.push(ProbeResult {
                scale: s * probe_scale,
                probe,
                cost,
                improvement,
                stderr: se,
                passed: improvement <= 3.0 * se,
            });
        }
    }
    let failures = probes.iter().filter(|p| !p.passed).count();
    Ok(OptimalityReport {
        candidate_cost: base_mean,
        candidate_stderr: base_se,
        n_samples: chain.len(),
        probes,
        failures,
        passed: failures == 0,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct InequalityResult {
    pub name: String,
    /// Expected error of the estimate predicted to lose, minus that of the winner.
    pub margin: f64,
    pub stderr: f64,
    pub passed: bool,
    pub map_value: f64,
    pub cm_value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TheoremIneqReport {
    /// `E|L(û_MAP - u)|² - E|L(û_CM - u)|² ≥ 0`.
    pub quadratic: InequalityResult,
    /// `E D_J(û_CM, u) - E D_J(û_MAP, u) ≥ 0`.
    pub bregman: InequalityResult,
    pub passed: bool,
}

/// Monte Carlo check of the two expected-error inequalities between MAP and CM
/// with paired samples.
pub fn theorem_ineq_check(
    chain: &Chain,
    map_est: &[f64],
    cm_est: &[f64],
    l: Option<&Operator>,
    prior: &Prior,
) -> Result<TheoremIneqReport> {
    if chain.is_empty() {
        return Err(Error::NotEnoughSamples { have: 0, need: 1 });
    }
    let n = chain.dim();
    check_dim("theorem_ineq_check: map", n, map_est.len())?;
    check_dim("theorem_ineq_check: cm", n, cm_est.len())?;
    check_dim("theorem_ineq_check: prior", n, prior.dim())?;
    let apply_l = |v: &[f64]| -> Vec<f64> {
        match l {
            Some(op) => op.apply(v),
            None => v.to_vec(),
        }
    };
    let l_map = apply_l(map_est);
    let l_cm = apply_l(cm_est);
    let j_map = prior.energy(map_est);
    let j_cm = prior.energy(cm_est);
    let delta = sub(cm_est, map_est);

    let count = chain.len();
    let mut quad_diff = Vec::with_capacity(count);
    let mut breg_diff = Vec::with_capacity(count);
    let (mut q_map, mut q_cm, mut b_map, mut b_cm) = (0.0, 0.0, 0.0, 0.0);
    for u in chain.iter() {
        let lu = apply_l(u);
        let dm = sub(&l_map, &lu);
        let dc = sub(&l_cm, &lu);
        let (em, ec) = (dot(&dm, &dm), dot(&dc, &dc));
        quad_diff.push(em - ec);
        q_map += em;
        q_cm += ec;
        // D(û, u) = J(û) - J(u) - <J'(u), û - u>; the J(u) terms cancel in the difference
        let q = prior.subgradient(u);
        let ju = prior.energy(u);
        let dmap = j_map - ju - dot(&q, &sub(map_est, u));
        let dcm = j_cm - ju - dot(&q, &sub(cm_est, u));
        breg_diff.push((j_cm - j_map) - dot(&q, &delta));
        b_map += dmap;
        b_cm += dcm;
    }
    let c = count as f64;
    let (qm, qs) = scalar_mean_stderr(&quad_diff)?;
    let (bm, bs) = scalar_mean_stderr(&breg_diff)?;
    let quadratic = InequalityResult {
        name: "E|L(cm - u)|^2 <= E|L(map - u)|^2".into(),
        margin: qm,
        stderr: qs,
        passed: qm >= -3.0 * qs,
        map_value: q_map / c,
        cm_value: q_cm / c,
    };
    let bregman = InequalityResult {
        name: "E D_J(map, u) <= E D_J(cm, u)".into(),
        margin: bm,
        stderr: bs,
        passed: bm >= -3.0 * bs,
        map_value: b_map / c,
        cm_value: b_cm / c,
    };
    let passed = quadratic.passed && bregman.passed;
    Ok(TheoremIneqReport {
        quadratic,
        bregman,
        passed,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CenteredEnergyReport {
    pub n_points: usize,
    pub mean_delta: f64,
    pub spread: f64,
    pub tolerance: f64,
    /// `Δ(û_MAP)`, which equals the energy at the center.
    pub delta_at_center: f64,
    pub passed: bool,
}

/// `Δ(u) = E(u) - [½|K(u - û)|²_{Σ^{-1}} + λ D^{p̂}(u, û)]` must be constant
/// in `u` when `p̂` is the MAP certificate.
pub fn centered_energy_check(post: &Posterior, map: &MapResult, n_points: usize, seed: u64) -> Result<CenteredEnergyReport> {
    let center = map.estimate.values();
    let cert = &map.subgradient_cert;
    if cert.len() != center.len() || cert.is_empty() {
        return Err(Error::InvalidParameter("MAP result carries no subgradient certificate".into()));
    }
    let lambda = post.lambda();
    let delta = |u: &[f64]| -> Result<f64> {
        let centered = post.output_distance(u, center) + lambda * post.prior().bregman(u, center, Some(cert))?.value;
        Ok(post.neg_log_posterior(u)? - centered)
    };
    let delta_at_center = delta(center)?;
    let scale = 1.0 + center.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n_points);
    for _ in 0..n_points {
        let u: Vec<f64> = center
            .iter()
            .map(|c| {
                let z: f64 = StandardNormal.sample(&mut rng);
                c + scale * z
            })
            .collect();
        values.push(delta(&u)?);
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean_delta = values.iter().sum::<f64>() / values.len().max(1) as f64;
    let spread = if values.is_empty() { 0.0 } else { hi - lo };
    let tolerance = 1e-8 * (1.0 + mean_delta.abs());
    Ok(CenteredEnergyReport {
        n_points,
        mean_delta,
        spread,
        tolerance,
        delta_at_center,
        passed: spread <= tolerance,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct UniformCostPoint {
    pub delta: f64,
    pub minimizer: [f64; 2],
    pub expected_cost: f64,
    pub distance_to_mode: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct UniformCostDiagnostic {
    pub mode: [f64; 2],
    pub points: Vec<UniformCostPoint>,
}

/// Brute-force minimizers of the expected uniform cost on a grid-discretized
/// two-dimensional posterior, for shrinking `deltas`. Diagnostic only.
pub fn uniform_cost_diagnostic(
    post: &Posterior,
    center: [f64; 2],
    half_width: f64,
    grid_points: usize,
    deltas: &[f64],
) -> Result<UniformCostDiagnostic> {
    check_dim("uniform_cost_diagnostic: dimension", 2, post.dim())?;
    if grid_points < 3 || !(half_width > 0.0) {
        return Err(Error::InvalidParameter("need at least 3 grid points and a positive half width".into()));
    }
    let g = grid_points;
    let h = 2.0 * half_width / (g - 1) as f64;
    let coord = |i: usize, c: f64| c - half_width + i as f64 * h;
    let mut energy = vec![0.0; g * g];
    for i in 0..g {
        for j in 0..g {
            energy[i * g + j] = post.neg_log_posterior(&[coord(i, center[0]), coord(j, center[1])])?;
        }
    }
    let emin = energy.iter().copied().fold(f64::INFINITY, f64::min);
    let dens: Vec<f64> = energy.iter().map(|e| (emin - e).exp()).collect();
    let total: f64 = dens.iter().sum();
    let mode_idx = (0..g * g).min_by(|a, b| energy[*a].total_cmp(&energy[*b])).unwrap();
    let mode = [coord(mode_idx / g, center[0]), coord(mode_idx % g, center[1])];

    // 2D prefix sums of the normalized cell masses
    let mut prefix = vec![0.0; (g + 1) * (g + 1)];
    for i in 0..g {
        for j in 0..g {
            prefix[(i + 1) * (g + 1) + j + 1] =
                dens[i * g + j] / total + prefix[i * (g + 1) + j + 1] + prefix[(i + 1) * (g + 1) + j] - prefix[i * (g + 1) + j];
        }
    }
    let box_mass = |i0: usize, i1: usize, j0: usize, j1: usize| {
        prefix[(i1 + 1) * (g + 1) + j1 + 1] - prefix[i0 * (g + 1) + j1 + 1] - prefix[(i1 + 1) * (g + 1) + j0] + prefix[i0 * (g + 1) + j0]
    };
    let mut points = Vec::new();
    for &delta in deltas {
        let r = (delta / h + 1e-9).floor() as usize;
        let mut best = (f64::INFINITY, 0usize, 0usize);
        for i in 0..g {
            for j in 0..g {
                let mass = box_mass(i.saturating_sub(r), (i + r).min(g - 1), j.saturating_sub(r), (j + r).min(g - 1));
                let cost = 1.0 - mass;
                if cost < best.0 {
                    best = (cost, i, j);
                }
            }
        }
        let m = [coord(best.1, center[0]), coord(best.2, center[1])];
        points.push(UniformCostPoint {
            delta,
            minimizer: m,
            expected_cost: best.0,
            distance_to_mode: ((m[0] - mode[0]).powi(2) + (m[1] - mode[1]).powi(2)).sqrt(),
        });
    }
    Ok(UniformCostDiagnostic { mode, points })
}
