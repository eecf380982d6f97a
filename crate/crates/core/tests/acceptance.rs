//! Acceptance run: one PASS/FAIL line per criterion. Exits non-zero when any
//! criterion fails.

mod common;

use std::cell::OnceCell;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use bregman_bayes::bayescost::{
    centered_energy_check, mc_bayes_cost, theorem_ineq_check, verify_bayes_optimality, CostSpec,
};
use bregman_bayes::experiments::config::ScenarioName;
use bregman_bayes::experiments::{run_dilemma, run_experiment, DilemmaRecord, ExperimentRecord, LambdaScaling, ScenarioConfig};
use bregman_bayes::grid::Grid;
use bregman_bayes::map_solver::{solve_map, MapResult, SolverOptions};
use bregman_bayes::operators::{adjoint_mismatch, haar_transform, to_dense, DenseMatrix, LinearOperator, Operator};
use bregman_bayes::posterior::Posterior;
use bregman_bayes::priors::Prior;
use bregman_bayes::sampler::{sample_gibbs, summarize, Chain, SamplerOptions};
use common::{
    all_operators, brute_force_map, ks_random_conditionals, l1_prox_bruteforce, psi_brg, psi_ls, random_problem,
    tv_prox_bruteforce, BETA, SCALAR,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Bundled experiments, run once on first use.
#[derive(Default)]
struct Runs {
    deblur: OnceCell<Result<ExperimentRecord, String>>,
    tv1d: OnceCell<Result<ExperimentRecord, String>>,
    ct: OnceCell<Result<ExperimentRecord, String>>,
    dilemma: OnceCell<Result<DilemmaRecord, String>>,
}

fn preset(name: ScenarioName) -> ScenarioConfig {
    ScenarioConfig::preset(name).expect("preset exists")
}

impl Runs {
    fn experiment<'a>(cell: &'a OnceCell<Result<ExperimentRecord, String>>, name: ScenarioName) -> Result<&'a ExperimentRecord, String> {
        cell.get_or_init(|| {
            let t = Instant::now();
            let r = run_experiment(&preset(name), None).map_err(err);
            eprintln!("  ({name} experiment ran in {:.1} s)", t.elapsed().as_secs_f64());
            r
        })
        .as_ref()
        .map_err(|e| format!("{name} run failed: {e}"))
    }

    fn deblur(&self) -> Result<&ExperimentRecord, String> {
        Self::experiment(&self.deblur, ScenarioName::Deblur2d)
    }

    fn tv1d(&self) -> Result<&ExperimentRecord, String> {
        Self::experiment(&self.tv1d, ScenarioName::Tv1d)
    }

    fn ct(&self) -> Result<&ExperimentRecord, String> {
        Self::experiment(&self.ct, ScenarioName::Ct2d)
    }

    fn dilemma(&self) -> Result<&DilemmaRecord, String> {
        self.dilemma
            .get_or_init(|| {
                let t = Instant::now();
                let r = run_dilemma(&preset(ScenarioName::Tv1d), None).map(|(rec, _)| rec).map_err(err);
                eprintln!("  (dilemma sweep ran in {:.1} s)", t.elapsed().as_secs_f64());
                r
            })
            .as_ref()
            .map_err(|e| format!("dilemma run failed: {e}"))
    }
}

/// Small problems shared by several criteria.
struct Fixtures {
    gaussian: Posterior,
    l1: Posterior,
    l1_map: MapResult,
    l1_chain: Chain,
    scalar_chain: Chain,
}

fn fixtures() -> Fixtures {
    let gaussian = random_problem(16, 24, 0.3, Prior::gaussian(16, 1.0, 1.0, None).unwrap(), 101);
    let l1 = random_problem(8, 12, 0.3, Prior::l1(8, 2.0, None).unwrap(), 202);
    let l1_map = solve_map(&l1, &SolverOptions::default()).unwrap();
    let l1_chain = sample_gibbs(&l1, &SamplerOptions::new(100_000, 7)).unwrap();
    let scalar_chain = sample_gibbs(&SCALAR.posterior(), &SamplerOptions::new(100_000, 11)).unwrap();
    Fixtures {
        gaussian,
        l1,
        l1_map,
        l1_chain,
        scalar_chain,
    }
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(1e-300)
}

fn criterion_1(fx: &Fixtures) -> Outcome {
    let post = &fx.gaussian;
    let k = to_dense(post.operator().as_ref());
    let (m, n) = (k.rows(), k.cols());
    let km = DMatrix::from_fn(m, n, |i, j| k.get(i, j));
    let s2 = post.noise().sigma().ok_or("non-scalar noise")?.powi(2);
    let a = km.transpose() * &km / s2 + DMatrix::identity(n, n);
    let b = km.transpose() * DVector::from_column_slice(post.data()) / s2;
    let exact = a.cholesky().ok_or("normal matrix not SPD")?.solve(&b);
    let exact: Vec<f64> = exact.iter().copied().collect();

    let map = solve_map(post, &SolverOptions::default()).map_err(err)?;
    let map_rel = rel_diff(map.estimate.values(), &exact);
    check(map_rel <= 1e-8, format!("MAP vs closed form: relative {map_rel:.2e} > 1e-8"))?;

    let chain = sample_gibbs(post, &SamplerOptions::new(50_000, 5)).map_err(err)?;
    let s = summarize(&chain, post.prior()).map_err(err)?;
    let worst_z = s
        .mean
        .values()
        .iter()
        .zip(&exact)
        .zip(&s.stderr)
        .map(|((c, e), se)| (c - e).abs() / se)
        .fold(0.0, f64::max);
    check(worst_z <= 3.0, format!("Gibbs CM off by {worst_z:.2} stderr"))?;
    Ok(format!("MAP rel {map_rel:.1e}; CM worst |z| = {worst_z:.2} over 16 components"))
}

fn criterion_2(fx: &Fixtures) -> Outcome {
    let post = SCALAR.posterior();
    let map = solve_map(&post, &SolverOptions::default()).map_err(err)?;
    let grid = brute_force_map(&SCALAR);
    let u_map = map.estimate.values()[0];
    check((u_map - 1.5).abs() <= 1e-8 && (u_map - grid).abs() <= 1e-8, format!("MAP {u_map} (grid {grid})"))?;

    let chain = &fx.scalar_chain;
    let s = summarize(chain, post.prior()).map_err(err)?;
    let mut worst: f64 = 0.0;
    let mut z = |what: &str, mc: f64, se: f64, exact: f64| -> Result<(), String> {
        let zz = (mc - exact).abs() / se;
        worst = worst.max(zz);
        check(zz <= 3.0, format!("{what}: {mc} ± {se} vs quadrature {exact}"))
    };
    let cm = SCALAR.mean();
    z("CM", s.mean.values()[0], s.stderr[0], cm)?;
    let p_cm = SCALAR.expect(&|u| if u > 0.0 { 1.0 } else if u < 0.0 { -1.0 } else { 0.0 });
    z("p_CM", s.subgradient_mean[0], s.subgradient_stderr[0], p_cm)?;
    let brg = CostSpec::bregman_for(&post);
    let ls = CostSpec::ls_for(&post, None, BETA).map_err(err)?;
    for (name, uh) in [("MAP", 1.5), ("CM", cm)] {
        let r = mc_bayes_cost(chain, &[uh], &brg).map_err(err)?;
        z(&format!("Ψ_Brg at {name}"), r.estimate_cost, r.stderr, SCALAR.expect(&|u| psi_brg(&SCALAR, u, uh)))?;
        let r = mc_bayes_cost(chain, &[uh], &ls).map_err(err)?;
        z(&format!("Ψ_LS at {name}"), r.estimate_cost, r.stderr, SCALAR.expect(&|u| psi_ls(&SCALAR, u, uh)))?;
    }
    Ok(format!("MAP = {u_map:.10}; CM = {cm:.5}; 6 Monte Carlo quantities, worst |z| = {worst:.2} (n = {})", chain.len()))
}

fn certify(post: &Posterior, chain: &Chain, map: &[f64], seed: u64) -> Result<String, String> {
    let cm = summarize(chain, post.prior()).map_err(err)?.mean.into_values();
    let brg = CostSpec::bregman_for(post);
    let ls = CostSpec::ls_for(post, None, 1.0).map_err(err)?;
    let m = verify_bayes_optimality(chain, map, &brg, 50, 1.0, seed).map_err(err)?;
    check(m.passed, format!("MAP rejected under Ψ_Brg ({} of {} probes)", m.failures, m.probes.len()))?;
    let c = verify_bayes_optimality(chain, &cm, &ls, 50, 1.0, seed).map_err(err)?;
    check(c.passed, format!("CM rejected under Ψ_LS ({} of {} probes)", c.failures, c.probes.len()))?;
    let moved: Vec<f64> = map.iter().map(|v| v + 0.5).collect();
    let d = verify_bayes_optimality(chain, &moved, &brg, 50, 1.0, seed).map_err(err)?;
    check(!d.passed, "displaced MAP was not rejected")?;
    Ok(format!("{} probes each; displaced MAP beaten by {} probes", m.probes.len(), d.failures))
}

fn criterion_3(fx: &Fixtures) -> Outcome {
    let scalar = certify(&SCALAR.posterior(), &fx.scalar_chain, &[1.5], 31)?;
    let eight = certify(&fx.l1, &fx.l1_chain, fx.l1_map.estimate.values(), 32)?;
    Ok(format!("scalar: {scalar}; 8-dim: {eight}"))
}

fn criterion_4(fx: &Fixtures, runs: &Runs) -> Outcome {
    let cm = summarize(&fx.l1_chain, fx.l1.prior()).map_err(err)?.mean.into_values();
    let r = theorem_ineq_check(&fx.l1_chain, fx.l1_map.estimate.values(), &cm, None, fx.l1.prior()).map_err(err)?;
    let line = |name: &str, r: &bregman_bayes::bayescost::TheoremIneqReport| {
        format!(
            "{name}: quadratic {:.3e} ± {:.1e}, bregman {:.3e} ± {:.1e}",
            r.quadratic.margin, r.quadratic.stderr, r.bregman.margin, r.bregman.stderr
        )
    };
    check(r.passed, line("8-dim", &r))?;
    let deblur = runs.deblur()?;
    let d = deblur.verification.inequalities.as_ref().ok_or("deblur inequalities not evaluated")?;
    check(d.passed, line("deblur", d))?;
    Ok(format!("{}; {}", line("8-dim", &r), line("deblur", d)))
}

fn criterion_5(fx: &Fixtures) -> Outcome {
    let mut parts = Vec::new();
    for (name, post, seed) in [("gaussian", &fx.gaussian, 51), ("l1", &fx.l1, 52)] {
        let map = solve_map(post, &SolverOptions::default()).map_err(err)?;
        let r = centered_energy_check(post, &map, 100, seed).map_err(err)?;
        check(r.passed, format!("{name}: spread {:.2e} > {:.2e}", r.spread, r.tolerance))?;
        parts.push(format!("{name} spread {:.1e} (tol {:.1e})", r.spread, r.tolerance));
    }
    Ok(parts.join("; "))
}

fn criterion_6(runs: &Runs) -> Outcome {
    let mut parts = Vec::new();
    let mut failed = Vec::new();
    for (name, rec) in [("deblur2d", runs.deblur()), ("tv1d", runs.tv1d()), ("ct2d", runs.ct())] {
        let rec = rec?;
        let a = rec.verification.average_optimality.as_ref().ok_or(format!("{name}: not evaluated"))?;
        parts.push(format!("{name} max z {:.2}", a.max_z));
        if !a.passed {
            failed.push(name.to_string());
        }
    }
    let dil = runs.dilemma()?;
    for row in &dil.rows {
        if let Some(a) = &row.average_optimality {
            parts.push(format!("dilemma n={} max z {:.2}", row.n, a.max_z));
            if !a.passed {
                failed.push(format!("dilemma n={}", row.n));
            }
        }
    }
    check(failed.is_empty(), format!("residual above 3 stderr on {failed:?}; {}", parts.join(", ")))?;
    Ok(parts.join(", "))
}

fn criterion_7(runs: &Runs) -> Outcome {
    let dil = runs.dilemma()?;
    let ranges: Vec<String> = dil.rows_for(LambdaScaling::Sqrt).map(|r| format!("{}:{:.3}", r.n, r.map_range)).collect();
    let cm_tv: Vec<String> = dil
        .rows_for(LambdaScaling::Constant)
        .map(|r| format!("{}:{:.3}", r.n, r.cm_tv.unwrap_or(f64::NAN)))
        .collect();
    let detail = format!(
        "sqrt MAP ranges [{}]; const CM TV [{}]; const MAP TV change {:.2}%",
        ranges.join(" "),
        cm_tv.join(" "),
        100.0 * dil.const_map_tv_rel_change
    );
    check(dil.sqrt_map_range_nonincreasing, format!("sup-range grows: {detail}"))?;
    check(dil.const_cm_tv_nondecreasing == Some(true), format!("CM TV decreases: {detail}"))?;
    check(dil.const_map_tv_stable, format!("MAP TV unstable: {detail}"))?;
    for row in &dil.rows {
        check(row.cm.is_none() || row.discrepancy.is_some(), format!("no discrepancy for n={}", row.n))?;
    }
    Ok(detail)
}

fn criterion_8(runs: &Runs) -> Outcome {
    let m = &runs.deblur()?.metrics;
    let detail = format!("MAP rel error {:.4}, CM rel error {:.4}", m.map_rel_error, m.cm_rel_error);
    check(m.map_rel_error < m.cm_rel_error, detail.clone())?;
    Ok(detail)
}

fn criterion_9(runs: &Runs) -> Outcome {
    let rec = runs.ct()?;
    let m = &rec.metrics;
    let detail = format!(
        "λ = {:.4e}; |MAP - CM| = {:.4}, |MAP - truth| = {:.4}, ratio {:.3}",
        rec.lambda,
        m.map_cm_distance,
        m.map_truth_distance,
        m.map_cm_distance / m.map_truth_distance
    );
    check(m.map_cm_distance <= 0.5 * m.map_truth_distance, detail.clone())?;
    Ok(detail)
}

fn prox_checks() -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut count = 0;
    let close = |a: &[f64], b: &[f64], what: &str| -> Result<(), String> {
        let e = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        check(e <= 1e-6, format!("{what}: prox differs from brute force by {e:.2e}"))
    };
    for n in 1..=6usize {
        for _ in 0..10 {
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let t = rng.random_range(0.05..1.0);
            let l1 = Prior::l1(n, 1.0, None).map_err(err)?;
            close(&l1.prox(&v, t).map_err(err)?, &l1_prox_bruteforce(&l1, &DenseMatrix::identity(n), &v, t), "l1")?;
            let g = Prior::gaussian(n, 1.0, 2.0, None).map_err(err)?;
            let exact: Vec<f64> = v.iter().map(|x| x / (1.0 + 2.0 * t)).collect();
            close(&g.prox(&v, t).map_err(err)?, &exact, "gaussian")?;
            if n >= 2 {
                let tv = Prior::tv1d(n, 1.0).map_err(err)?;
                close(&tv.prox(&v, t).map_err(err)?, &tv_prox_bruteforce(&v, t), "tv")?;
            }
            count += 3;
        }
    }
    for (grid, levels) in [(Grid::new_1d(2).unwrap(), 1), (Grid::new_1d(4).unwrap(), 2), (Grid::square(2).unwrap(), 1)] {
        let w: Operator = Arc::new(haar_transform(grid, levels).map_err(err)?);
        let dense = to_dense(w.as_ref());
        for _ in 0..10 {
            let weights: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(0.5..2.0)).collect();
            let p = Prior::besov(1.0, weights, w.clone()).map_err(err)?;
            let v: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(-2.0..2.0)).collect();
            let t = rng.random_range(0.05..1.0);
            close(&p.prox(&v, t).map_err(err)?, &l1_prox_bruteforce(&p, &dense, &v, t), "besov")?;
            count += 1;
        }
    }
    Ok(count)
}

fn reproducibility() -> Result<(), String> {
    let mut cfg = preset(ScenarioName::Tv1d);
    cfg.grid.size = 63;
    cfg.sampler.n_samples = 300;
    cfg.verify.n_probes = 3;
    cfg.verify.centered_points = 10;
    let a = run_experiment(&cfg, None).map_err(err)?;
    let b = run_experiment(&cfg, None).map_err(err)?;
    let ja = serde_json::to_string(&a).map_err(err)?;
    let jb = serde_json::to_string(&b).map_err(err)?;
    check(ja == jb, "experiment records differ between identical runs")?;
    let bits = |s: &bregman_bayes::Signal| s.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    check(bits(&a.map.estimate) == bits(&b.map.estimate), "MAP differs bitwise")?;
    check(bits(&a.cm.mean) == bits(&b.cm.mean), "CM differs bitwise")?;
    let post = SCALAR.posterior();
    let c1 = sample_gibbs(&post, &SamplerOptions::new(1000, 3)).map_err(err)?;
    let c2 = sample_gibbs(&post, &SamplerOptions::new(1000, 3)).map_err(err)?;
    let raw = |c: &Chain| c.raw().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    check(raw(&c1) == raw(&c2), "Gibbs chains differ bitwise")
}

fn criterion_10() -> Outcome {
    let ops = all_operators();
    let mut worst: f64 = 0.0;
    for (i, op) in ops.iter().enumerate() {
        let m = adjoint_mismatch(op.as_ref(), 20, 1000 + i as u64);
        check(m <= 1e-10, format!("{} adjoint mismatch {m:.2e}", op.name()))?;
        worst = worst.max(m);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut iso: f64 = 0.0;
    for (grid, levels) in [(Grid::new_1d(64).unwrap(), 6), (Grid::square(32).unwrap(), 5)] {
        let w = haar_transform(grid, levels).map_err(err)?;
        for _ in 0..20 {
            let x: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let nc = w.apply(&x).iter().map(|v| v * v).sum::<f64>().sqrt();
            iso = iso.max((nx - nc).abs() / nx);
        }
    }
    check(iso <= 1e-12, format!("Haar isometry error {iso:.2e}"))?;
    let n_prox = prox_checks()?;
    let ks = ks_random_conditionals(200, 100_000, 2024, 1e-3);
    check(ks.failures.is_empty(), format!("KS failures: {:?}", ks.failures))?;
    reproducibility()?;
    Ok(format!(
        "{} operators, worst adjoint mismatch {worst:.1e}; Haar isometry {iso:.1e}; {n_prox} prox cases; \
         200 KS tests, min p = {:.2e}; fixed-seed runs bit-identical",
        ops.len(),
        ks.worst_p
    ))
}

fn main() {
    let start = Instant::now();
    let runs = Runs::default();
    let fx = OnceCell::new();
    let fx = || fx.get_or_init(fixtures);
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("Gaussian MAP and CM coincide", Box::new(|| criterion_1(fx()))),
        ("scalar l1 oracle suite", Box::new(|| criterion_2(fx()))),
        ("Bayes-optimality certification", Box::new(|| criterion_3(fx()))),
        ("expected-error inequalities", Box::new(|| criterion_4(fx(), &runs))),
        ("MAP-centered energy identity", Box::new(|| criterion_5(fx()))),
        ("CM average optimality", Box::new(|| criterion_6(&runs))),
        ("TV discretization dilemma", Box::new(|| criterion_7(&runs))),
        ("deblurring: MAP beats CM", Box::new(|| criterion_8(&runs))),
        ("CT with Besov prior: MAP close to CM", Box::new(|| criterion_9(&runs))),
        ("infrastructure", Box::new(criterion_10)),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.1} s]", i + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {:>2} FAIL  {name}: {detail} [{secs:.1} s]", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed in {:.1} s",
        criteria.len() - failures,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
