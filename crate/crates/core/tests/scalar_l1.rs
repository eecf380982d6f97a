//! The scalar ℓ1 posterior `f = 2, K = 1, σ = 1, λ = 0.5` against brute-force
//! minimization and adaptive quadrature.

mod common;

use bregman_bayes::bayescost::{mc_bayes_cost, theorem_ineq_check, verify_bayes_optimality, CostSpec};
use bregman_bayes::map_solver::{solve_map, SolverOptions};
use bregman_bayes::sampler::{sample_gibbs, summarize, Chain, SamplerOptions};
use common::{brute_force_map, psi_brg, psi_ls, ScalarL1, BETA, SCALAR};

const PROBLEM: ScalarL1 = SCALAR;

fn chain() -> Chain {
    sample_gibbs(&PROBLEM.posterior(), &SamplerOptions::new(100_000, 11)).unwrap()
}

fn within(what: &str, mc: f64, se: f64, exact: f64) {
    assert!((mc - exact).abs() <= 3.0 * se, "{what}: Monte Carlo {mc} ± {se}, quadrature {exact}");
}

#[test]
fn map_matches_brute_force() {
    let post = PROBLEM.posterior();
    let map = solve_map(&post, &SolverOptions::default()).unwrap();
    let grid = brute_force_map(&PROBLEM);
    assert!((grid - 1.5).abs() <= 1e-8);
    assert!((map.estimate.values()[0] - grid).abs() <= 1e-8, "{} vs {grid}", map.estimate.values()[0]);
}

#[test]
fn chain_moments_and_costs_match_quadrature() {
    let post = PROBLEM.posterior();
    let chain = chain();
    let summary = summarize(&chain, post.prior()).unwrap();
    let cm = PROBLEM.mean();
    within("CM", summary.mean.values()[0], summary.stderr[0], cm);
    let p_cm = PROBLEM.expect(&|u| u.signum() * (u != 0.0) as u8 as f64);
    within("p_CM", summary.subgradient_mean[0], summary.subgradient_stderr[0], p_cm);

    let brg = CostSpec::bregman_for(&post);
    let ls = CostSpec::ls_for(&post, None, BETA).unwrap();
    for (name, uh) in [("map", 1.5), ("cm", cm)] {
        let r = mc_bayes_cost(&chain, &[uh], &brg).unwrap();
        within(&format!("Ψ_Brg at {name}"), r.estimate_cost, r.stderr, PROBLEM.expect(&|u| psi_brg(&PROBLEM, u, uh)));
        let r = mc_bayes_cost(&chain, &[uh], &ls).unwrap();
        within(&format!("Ψ_LS at {name}"), r.estimate_cost, r.stderr, PROBLEM.expect(&|u| psi_ls(&PROBLEM, u, uh)));
    }
}

#[test]
fn optimality_certificates() {
    let post = PROBLEM.posterior();
    let chain = chain();
    let cm = summarize(&chain, post.prior()).unwrap().mean.values()[0];
    let brg = CostSpec::bregman_for(&post);
    let ls = CostSpec::ls_for(&post, None, BETA).unwrap();
    assert!(verify_bayes_optimality(&chain, &[1.5], &brg, 50, 1.0, 3).unwrap().passed);
    assert!(verify_bayes_optimality(&chain, &[cm], &ls, 50, 1.0, 3).unwrap().passed);
    assert!(!verify_bayes_optimality(&chain, &[2.0], &brg, 50, 1.0, 3).unwrap().passed);
}

#[test]
fn inequalities_match_quadrature() {
    let post = PROBLEM.posterior();
    let chain = chain();
    let cm_exact = PROBLEM.mean();
    let cm = summarize(&chain, post.prior()).unwrap().mean.values()[0];
    let rep = theorem_ineq_check(&chain, &[1.5], &[cm], None, post.prior()).unwrap();
    assert!(rep.passed);
    let margins = |c: f64| {
        let quad = PROBLEM.expect(&|u| (1.5 - u).powi(2) - (c - u).powi(2));
        let dj = |u: f64, uh: f64| (psi_brg(&PROBLEM, u, uh) - (uh - u).powi(2)) / (2.0 * PROBLEM.lambda);
        let breg = PROBLEM.expect(&|u| dj(u, c) - dj(u, 1.5));
        (quad, breg)
    };
    // the exact margins are strictly positive
    let (quad, breg) = margins(cm_exact);
    assert!(quad > 0.0 && breg > 0.0, "{quad} {breg}");
    // the chain statistics are evaluated at the sampled CM
    let (quad, breg) = margins(cm);
    within("quadratic margin", rep.quadratic.margin, rep.quadratic.stderr, quad);
    within("bregman margin", rep.bregman.margin, rep.bregman.stderr, breg);
}
