use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::grid::{Grid, Signal};
use crate::map_solver::{solve_map, SolverOptions};
use crate::noise::GaussianNoiseModel;
use crate::operators::{DenseMatrix, Identity, Operator, Zero};
use crate::posterior::Posterior;
use crate::priors::Prior;
use crate::sampler::{sample_gibbs, summarize, Chain, SamplerOptions};

fn random_dense(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    DenseMatrix::new(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Regular L: identity plus a small random perturbation.
fn random_regular(n: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let mut d = random_dense(n, n, rng).data().to_vec();
    for x in d.iter_mut() {
        *x *= 0.2;
    }
    for i in 0..n {
        d[i * n + i] += 1.0;
    }
    DenseMatrix::new(n, n, d).unwrap()
}

fn scalar_post(prior: Prior, f: f64, sigma: f64) -> Posterior {
    let g = Grid::new_1d(1).unwrap();
    Posterior::new(
        g,
        Arc::new(Identity::new(1)),
        Signal::new(g, vec![f]).unwrap(),
        GaussianNoiseModel::from_sigma(1, sigma).unwrap(),
        prior,
    )
    .unwrap()
}

fn random_post(n: usize, m: usize, prior: Prior, seed: u64) -> Posterior {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k: Operator = Arc::new(random_dense(m, n, &mut rng));
    let f: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
    let g = Grid::new_1d(n).unwrap();
    Posterior::new(
        g,
        k,
        Signal::new(Grid::new_1d(m).unwrap(), f).unwrap(),
        GaussianNoiseModel::from_sigma(m, 0.5).unwrap(),
        prior,
    )
    .unwrap()
}

#[test]
fn cost_ls_examples() {
    let zero: Operator = Arc::new(Zero::new(2, 2));
    let noise = GaussianNoiseModel::from_sigma(2, 1.0).unwrap();
    let spec = CostSpec::ls(Some((zero, noise.clone())), None, 1.0).unwrap();
    assert_eq!(cost_ls(&[0.0, 0.0], &[1.0, 2.0], &spec).unwrap(), 5.0);
    assert_eq!(cost_ls(&[0.3, -0.1], &[0.3, -0.1], &spec).unwrap(), 0.0);

    let id: Operator = Arc::new(Identity::new(2));
    let out_only = CostSpec::ls(Some((id, noise)), None, 0.0).unwrap();
    assert_eq!(cost_ls(&[0.0, 0.0], &[1.0, 2.0], &out_only).unwrap(), 5.0);
    assert!(cost_ls(&[0.0], &[1.0, 2.0], &spec).is_err());
    assert!(CostSpec::ls(None, None, -1.0).is_err());
}

#[test]
fn mse_is_ls_without_output_term() {
    let mse = CostSpec::mse();
    let ls = CostSpec::ls(None, None, 1.0).unwrap();
    let (u, v) = ([0.5, -1.0, 2.0], [1.0, 1.0, 1.0]);
    assert_eq!(mse.eval(&u, &v).unwrap(), ls.eval(&u, &v).unwrap());
    assert_eq!(mse.eval(&u, &v).unwrap(), 0.25 + 4.0 + 1.0);
}

#[test]
fn cost_bregman_scalar_l1() {
    let spec = CostSpec::bregman(None, Prior::l1(1, 1.0, None).unwrap());
    assert_eq!(cost_bregman(&[1.0], &[-2.0], &spec).unwrap(), 8.0);
    assert_eq!(cost_bregman(&[1.0], &[1.0], &spec).unwrap(), 0.0);
    // an explicit zero operator gives the same value
    let zero: Operator = Arc::new(Zero::new(1, 1));
    let with_k = CostSpec::bregman(Some((zero, GaussianNoiseModel::from_sigma(1, 1.0).unwrap())), Prior::l1(1, 1.0, None).unwrap());
    assert_eq!(cost_bregman(&[1.0], &[-2.0], &with_k).unwrap(), 8.0);
    assert!(cost_bregman(&[1.0], &[-2.0], &CostSpec::mse()).is_err());
}

#[test]
fn gaussian_bregman_cost_equals_ls_cost() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (n, m) = (6, 4);
    let k: Operator = Arc::new(random_dense(m, n, &mut rng));
    let l: Operator = Arc::new(random_regular(n, &mut rng));
    let noise = GaussianNoiseModel::diagonal((0..m).map(|_| rng.random_range(0.5..2.0)).collect()).unwrap();
    let (lambda, beta) = (0.7, 1.9);
    let prior = Prior::gaussian(n, lambda, beta, Some(l.clone())).unwrap();
    let ls = CostSpec::ls(Some((k.clone(), noise.clone())), Some(l), beta).unwrap();
    let brg = CostSpec::bregman(Some((k, noise)), prior);
    for _ in 0..100 {
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let a = ls.eval(&u, &v).unwrap();
        let b = brg.eval(&u, &v).unwrap();
        assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{a} vs {b}");
    }
}

#[test]
fn cost_uniform_boundary() {
    assert_eq!(cost_uniform(&[0.0, 1.0], &[0.0, 1.0], 0.25), 0.0);
    assert_eq!(cost_uniform(&[0.0, 1.0], &[0.25, 1.0], 0.25), 0.0);
    assert_eq!(cost_uniform(&[0.0, 1.0], &[0.5, 1.0], 0.25), 1.0);
    assert!(CostSpec::uniform(0.0).is_err());
}

#[test]
fn degenerate_chain_has_zero_cost() {
    let g = Grid::new_1d(2).unwrap();
    let chain = Chain::from_samples(g, &vec![vec![0.5, -1.0]; 50], 0).unwrap();
    let r = mc_bayes_cost(&chain, &[0.5, -1.0], &CostSpec::mse()).unwrap();
    assert_eq!(r.estimate_cost, 0.0);
    assert_eq!(r.stderr, 0.0);
    assert_eq!(r.n_samples, 50);
    let empty = Chain::from_samples(g, &[], 0);
    if let Ok(empty) = empty {
        assert!(mc_bayes_cost(&empty, &[0.0, 0.0], &CostSpec::mse()).is_err());
    }
}

#[test]
fn mse_at_posterior_mean_is_variance() {
    // f = 1, σ = 1, J = u²/2 with λ = 1: posterior N(1/2, 1/2)
    let post = scalar_post(Prior::gaussian(1, 1.0, 1.0, None).unwrap(), 1.0, 1.0);
    let chain = sample_gibbs(&post, &SamplerOptions::new(50_000, 11)).unwrap();
    let r = mc_bayes_cost(&chain, &[0.5], &CostSpec::mse()).unwrap();
    assert!((r.estimate_cost - 0.5).abs() < 3.0 * r.stderr, "{r:?}");
}

#[test]
fn evaluator_matches_pointwise_costs() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 4;
    let post = random_post(n, 3, Prior::l1(n, 0.8, None).unwrap(), 2);
    let samples: Vec<Vec<f64>> = (0..40).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let chain = Chain::from_samples(*post.grid(), &samples, 0).unwrap();
    let l: Operator = Arc::new(random_regular(n, &mut rng));
    let specs = [
        CostSpec::bregman_for(&post),
        CostSpec::ls_for(&post, Some(l), 0.6).unwrap(),
        CostSpec::ls_for(&post, None, 1.0).unwrap(),
        CostSpec::mse(),
        CostSpec::uniform(0.8).unwrap(),
    ];
    let uhat = [0.1, -0.3, 0.0, 0.7];
    for spec in &specs {
        let eval = CostEvaluator::new(&chain, spec).unwrap();
        let fast = eval.costs(&uhat).unwrap();
        for (u, c) in chain.iter().zip(&fast) {
            let direct = spec.eval(u, &uhat).unwrap();
            assert!((direct - c).abs() <= 1e-12 * (1.0 + direct.abs()), "{spec:?}: {direct} vs {c}");
        }
    }
}

#[test]
fn gaussian_mean_is_certified_under_ls_cost() {
    let n = 3;
    let post = random_post(n, 4, Prior::gaussian(n, 1.0, 1.0, None).unwrap(), 5);
    let map = solve_map(&post, &SolverOptions::default()).unwrap();
    let chain = sample_gibbs(&post, &SamplerOptions::new(20_000, 1)).unwrap();
    let spec = CostSpec::ls_for(&post, None, 1.0).unwrap();
    let rep = verify_bayes_optimality(&chain, map.estimate.values(), &spec, 20, 0.5, 3).unwrap();
    assert!(rep.passed, "{} failures", rep.failures);
    assert_eq!(rep.probes.len(), 60);
}

#[test]
fn scalar_l1_map_certified_and_displaced_map_rejected() {
    let post = scalar_post(Prior::l1(1, 0.5, None).unwrap(), 2.0, 1.0);
    let map = solve_map(&post, &SolverOptions::default()).unwrap();
    assert!((map.estimate.values()[0] - 1.5).abs() < 1e-8);
    let chain = sample_gibbs(&post, &SamplerOptions::new(50_000, 21)).unwrap();
    let spec = CostSpec::bregman_for(&post);
    let ok = verify_bayes_optimality(&chain, &[1.5], &spec, 50, 1.0, 4).unwrap();
    assert!(ok.passed, "{} failures", ok.failures);
    let bad = verify_bayes_optimality(&chain, &[2.0], &spec, 50, 1.0, 4).unwrap();
    assert!(!bad.passed);
    assert!(bad.probes.iter().any(|p| p.improvement > 3.0 * p.stderr));
}

#[test]
fn gaussian_inequalities_hold_with_equality() {
    let n = 4;
    let post = random_post(n, 5, Prior::gaussian(n, 1.0, 2.0, None).unwrap(), 8);
    let map = solve_map(&post, &SolverOptions::default()).unwrap();
    let chain = sample_gibbs(&post, &SamplerOptions::new(20_000, 2)).unwrap();
    let cm = summarize(&chain, post.prior()).unwrap().mean;
    let rep = theorem_ineq_check(&chain, map.estimate.values(), cm.values(), None, post.prior()).unwrap();
    assert!(rep.passed, "{rep:?}");
    assert!(rep.quadratic.margin.abs() <= 3.0 * rep.quadratic.stderr + 1e-3);
}

#[test]
fn centered_energy_is_constant() {
    let post = scalar_post(Prior::l1(1, 0.5, None).unwrap(), 2.0, 1.0);
    let map = solve_map(&post, &SolverOptions::default()).unwrap();
    let r = centered_energy_check(&post, &map, 100, 1).unwrap();
    assert!(r.spread <= 1e-10, "{r:?}");
    let e = post.neg_log_posterior(map.estimate.values()).unwrap();
    assert!((r.delta_at_center - e).abs() < 1e-14);

    let n = 8;
    let post = random_post(n, 6, Prior::gaussian(n, 1.0, 1.5, None).unwrap(), 4);
    let map = solve_map(&post, &SolverOptions::default()).unwrap();
    let r = centered_energy_check(&post, &map, 100, 2).unwrap();
    assert!(r.spread <= 1e-8 && r.passed, "{r:?}");
}

#[test]
fn uniform_cost_minimizer_approaches_mode() {
    let g = Grid::new_1d(2).unwrap();
    let post = Posterior::new(
        g,
        Arc::new(Identity::new(2)),
        Signal::new(g, vec![1.0, -0.5]).unwrap(),
        GaussianNoiseModel::from_sigma(2, 0.7).unwrap(),
        Prior::l1(2, 1.0, None).unwrap(),
    )
    .unwrap();
    let d = uniform_cost_diagnostic(&post, [0.0, 0.0], 3.0, 241, &[0.5, 0.2, 0.1]).unwrap();
    assert_eq!(d.points.len(), 3);
    assert!(d.points.iter().all(|p| p.expected_cost >= 0.0 && p.expected_cost <= 1.0));
    assert!(d.points[2].distance_to_mode <= d.points[0].distance_to_mode + 0.05);
}

#[test]
fn report_renders() {
    let mut rep = VerificationReport::new();
    rep.push("a", 0.1, 0.01, true, "");
    rep.push("bb", -1.0, 0.01, false, "detail");
    assert!(!rep.all_passed());
    let text = rep.to_text();
    assert!(text.contains("FAIL") && text.contains("detail"));
    let json: serde_json::Value = serde_json::from_str(&rep.to_json().unwrap()).unwrap();
    assert_eq!(json["checks"][1]["check"], "bb");
}

proptest! {
    #[test]
    fn costs_convex_in_estimate(seed in 0u64..500, t in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 3;
        let post = random_post(n, 2, Prior::l1(n, 0.9, None).unwrap(), seed);
        let tv = random_post(n, 2, Prior::tv1d(n, 0.9).unwrap(), seed);
        let mut draw = || -> Vec<f64> { (0..n).map(|_| rng.random_range(-2.0..2.0)).collect() };
        let (u, a, b) = (draw(), draw(), draw());
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (1.0 - t) * x + t * y).collect();
        for spec in [CostSpec::bregman_for(&post), CostSpec::bregman_for(&tv), CostSpec::ls_for(&post, None, 0.7).unwrap()] {
            let (ca, cb, cm) = (spec.eval(&u, &a).unwrap(), spec.eval(&u, &b).unwrap(), spec.eval(&u, &mid).unwrap());
            prop_assert!(cm <= (1.0 - t) * ca + t * cb + 1e-10 * (1.0 + ca.abs() + cb.abs()));
        }
    }

    #[test]
    fn bregman_cost_dominates_output_term(seed in 0u64..500) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 4;
        for prior in [Prior::l1(n, 1.3, None).unwrap(), Prior::tv1d(n, 0.4).unwrap()] {
            let post = random_post(n, 3, prior, seed);
            let brg = CostSpec::bregman_for(&post);
            let out = CostSpec::ls_for(&post, None, 0.0).unwrap();
            let u: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            prop_assert!(brg.eval(&u, &v).unwrap() >= out.eval(&u, &v).unwrap() - 1e-12);
        }
    }
}
