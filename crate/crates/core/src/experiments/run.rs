use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use super::artifacts::{ArtifactWriter, Manifest};
use super::config::{ForwardKind, LambdaRule, MethodChoice, PhantomKind, PriorChoice, ScenarioConfig};
use super::data::{generate_data, GeneratedData};
use super::lambda::{lambda_sqrt_rule, map_sparsity, s_curve_select_lambda, sparsity_fraction, SCurveResult};
use super::phantoms::{build_indicator_1d, build_shepp_logan, build_spots_phantom_with, SpotRanges};
use crate::bayescost::{
    centered_energy_check, theorem_ineq_check, verify_bayes_optimality, CenteredEnergyReport, CostSpec, OptimalityReport,
    TheoremIneqReport, VerificationReport,
};
use crate::error::{Error, Result};
use crate::grid::{Grid, Signal};
use crate::map_solver::{solve_map, MapResult};
use crate::noise::GaussianNoiseModel;
use crate::operators::{cell_average_restriction, gaussian_blur, haar_transform, interval_integration, radon, Identity, LinearOperator, Operator};
use crate::posterior::Posterior;
use crate::priors::{Prior, PriorKind};
use crate::sampler::{
    average_optimality, sample_gibbs, sample_rwm, summarize, two_chain_discrepancy, AverageOptimality, Chain, ChainSummary,
    Discrepancy, SamplerMethod, SamplerOptions,
};
use crate::vecops::{norm2, sub};

/// Independent seed streams derived from the scenario seed.
#[derive(Clone, Copy, Debug)]
pub enum SeedStream {
    Phantom = 0,
    Noise = 1,
    Sampler = 2,
    Probes = 3,
    Centered = 4,
}

/// SplitMix64 finalizer of `seed + stream`.
pub fn derive_seed(seed: u64, stream: SeedStream) -> u64 {
    let mut z = seed.wrapping_add((stream as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Truth, data and reconstruction model of one scenario.
pub struct Scenario {
    pub config: ScenarioConfig,
    pub fine_grid: Grid,
    pub recon_grid: Grid,
    /// Truth on the fine grid.
    pub truth: Signal,
    /// Cell averages of the truth on the reconstruction grid.
    pub truth_recon: Signal,
    pub data: GeneratedData,
    pub operator: Operator,
    pub noise: GaussianNoiseModel,
}

fn is_1d(cfg: &ScenarioConfig) -> bool {
    cfg.forward.kind == ForwardKind::Integration || cfg.phantom.kind == PhantomKind::Indicator
}

fn build_truth(cfg: &ScenarioConfig, fine: Grid) -> Result<Signal> {
    let p = &cfg.phantom;
    match p.kind {
        PhantomKind::Spots => {
            let ranges = SpotRanges {
                radius_min: p.radius_min,
                radius_max: p.radius_max,
                intensity_min: p.intensity_min,
                intensity_max: p.intensity_max,
                gap: p.gap,
            };
            build_spots_phantom_with(fine, p.n_spots, &ranges, derive_seed(cfg.scenario.seed, SeedStream::Phantom))
        }
        PhantomKind::Indicator => build_indicator_1d(fine),
        PhantomKind::SheppLogan => build_shepp_logan(fine, p.table),
    }
}

/// (K on the fine grid, restriction to the data space, data grid, K on the
/// reconstruction grid).
fn build_forward(cfg: &ScenarioConfig, fine: Grid, recon: Grid) -> Result<(Operator, Operator, Grid, Operator)> {
    let f = &cfg.forward;
    Ok(match f.kind {
        ForwardKind::Blur => (
            Arc::new(gaussian_blur(fine, f.blur_sigma)?),
            Arc::new(cell_average_restriction(fine, recon)?),
            recon,
            Arc::new(gaussian_blur(recon, f.blur_sigma)?),
        ),
        ForwardKind::Integration => {
            if recon.dim() != 1 {
                return Err(Error::Config("integration forward model needs a 1D scenario".into()));
            }
            (
                Arc::new(interval_integration(fine.len(), f.intervals)?),
                Arc::new(Identity::new(f.intervals)),
                Grid::new_1d(f.intervals)?,
                Arc::new(interval_integration(recon.len(), f.intervals)?),
            )
        }
        ForwardKind::Radon => {
            let m = f.angles * f.bins;
            (
                Arc::new(radon(fine, f.angles, f.bins)?),
                Arc::new(Identity::new(m)),
                Grid::new_2d(f.angles, f.bins)?,
                Arc::new(radon(recon, f.angles, f.bins)?),
            )
        }
        ForwardKind::Identity => (
            Arc::new(cell_average_restriction(fine, recon)?),
            Arc::new(Identity::new(recon.len())),
            recon,
            Arc::new(Identity::new(recon.len())),
        ),
    })
}

pub fn build_prior(cfg: &ScenarioConfig, grid: Grid, lambda: f64) -> Result<Prior> {
    let n = grid.len();
    match cfg.prior.kind {
        PriorChoice::Gaussian => Prior::gaussian(n, lambda, cfg.prior.beta, None),
        PriorChoice::L1 => Prior::l1(n, lambda, None),
        PriorChoice::Tv => {
            if grid.dim() != 1 {
                return Err(Error::Config("the TV prior is available for 1D scenarios only".into()));
            }
            Prior::tv1d(n, lambda)
        }
        PriorChoice::Besov => {
            let levels = match cfg.prior.haar_levels {
                Some(l) => l,
                None => grid.cols().trailing_zeros() as usize,
            };
            Prior::besov(lambda, vec![1.0; n], Arc::new(haar_transform(grid, levels)?))
        }
    }
}

pub fn build_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let size = cfg.grid.size;
    let fine_size = size * cfg.grid.truth_factor;
    let (fine_grid, recon_grid) = if is_1d(cfg) {
        (Grid::new_1d(fine_size)?, Grid::new_1d(size)?)
    } else {
        (Grid::square(fine_size)?, Grid::square(size)?)
    };
    let truth = build_truth(cfg, fine_grid)?;
    let (k_fine, restrict, data_grid, operator) = build_forward(cfg, fine_grid, recon_grid)?;
    let data = generate_data(
        &truth,
        k_fine.as_ref(),
        restrict.as_ref(),
        cfg.noise.fraction,
        derive_seed(cfg.scenario.seed, SeedStream::Noise),
        data_grid,
    )?;
    let truth_recon = Signal::new(recon_grid, cell_average_restriction(fine_grid, recon_grid)?.apply(truth.values()))?;
    let noise = GaussianNoiseModel::from_sigma(data_grid.len(), data.sigma)?;
    Ok(Scenario {
        config: cfg.clone(),
        fine_grid,
        recon_grid,
        truth,
        truth_recon,
        data,
        operator,
        noise,
    })
}

impl Scenario {
    pub fn posterior(&self, lambda: f64) -> Result<Posterior> {
        Posterior::new(
            self.recon_grid,
            self.operator.clone(),
            self.data.data.clone(),
            self.noise.clone(),
            build_prior(&self.config, self.recon_grid, lambda)?,
        )
    }

    /// Nonzero transform-coefficient fraction of the (reconstruction-grid) truth.
    pub fn truth_sparsity(&self) -> Result<f64> {
        let prior = build_prior(&self.config, self.recon_grid, 1.0)?;
        Ok(sparsity_fraction(&prior.coefficients(self.truth_recon.values())))
    }
}

pub struct MapStage {
    pub lambda: f64,
    pub lambda_selection: Option<SCurveResult>,
    pub posterior: Posterior,
    pub map: MapResult,
}

pub fn solve_stage(sc: &Scenario) -> Result<MapStage> {
    let cfg = &sc.config;
    let opts = cfg.solver.options();
    let l = &cfg.lambda;
    let (lambda, selection, map) = match l.rule {
        LambdaRule::Fixed | LambdaRule::SqrtN => {
            let lambda = if l.rule == LambdaRule::Fixed { l.value } else { lambda_sqrt_rule(sc.recon_grid.len(), l.c)? };
            let map = solve_map(&sc.posterior(lambda)?, &opts)?;
            (lambda, None, map)
        }
        LambdaRule::SCurve => {
            let target = match l.target_sparsity {
                Some(t) => t,
                None => sc.truth_sparsity()?,
            };
            let r = s_curve_select_lambda(|lam| sc.posterior(lam), target, (l.bracket[0], l.bracket[1]), l.tol, &opts)?;
            let map = r.map.clone();
            (r.lambda, Some(r), map)
        }
    };
    if !map.converged {
        log::warn!("MAP solver stopped after {} iterations without converging", map.iterations);
    }
    Ok(MapStage {
        lambda,
        lambda_selection: selection,
        posterior: sc.posterior(lambda)?,
        map,
    })
}

pub struct CmStage {
    pub chains: Vec<Chain>,
    pub summary: ChainSummary,
    pub discrepancy: Option<Discrepancy>,
    pub method: SamplerMethod,
}

fn pick_method(choice: MethodChoice, prior: &Prior) -> SamplerMethod {
    match choice {
        MethodChoice::Gibbs => SamplerMethod::Gibbs,
        MethodChoice::Rwm => SamplerMethod::Rwm,
        MethodChoice::Auto => match prior.kind() {
            PriorKind::L1 { transform: Some(_), .. } => SamplerMethod::Rwm,
            _ => SamplerMethod::Gibbs,
        },
    }
}

/// Independent chains started at `start`; chain `i` uses RNG stream `i`.
pub fn sample_chains(cfg: &ScenarioConfig, post: &Posterior, start: &[f64]) -> Result<(Vec<Chain>, SamplerMethod)> {
    let s = &cfg.sampler;
    let method = pick_method(s.method, post.prior());
    let mut chains = Vec::with_capacity(s.chains);
    for i in 0..s.chains {
        let opts = SamplerOptions {
            n_samples: s.n_samples,
            burn_in: s.burn_in,
            thinning: s.thinning,
            seed: derive_seed(cfg.scenario.seed, SeedStream::Sampler),
            chain_index: i as u64,
            start: Some(start.to_vec()),
        };
        let chain = match method {
            SamplerMethod::Gibbs => sample_gibbs(post, &opts)?,
            SamplerMethod::Rwm => sample_rwm(post, &opts, s.rwm_step, s.rwm_mode)?,
        };
        if let Some(a) = chain.acceptance_rate {
            log::info!("chain {i}: acceptance rate {a:.3}");
        }
        chains.push(chain);
    }
    Ok((chains, method))
}

pub fn sample_stage(sc: &Scenario, map: &MapStage) -> Result<CmStage> {
    let (chains, method) = sample_chains(&sc.config, &map.posterior, map.map.estimate.values())?;
    let summary = summarize(&chains[0], map.posterior.prior())?;
    let discrepancy = match chains.get(1) {
        Some(b) => Some(two_chain_discrepancy(&chains[0], b)?),
        None => None,
    };
    Ok(CmStage {
        chains,
        summary,
        discrepancy,
        method,
    })
}

/// Total variation: `Σ|u_{i+1} - u_i|` in 1D, anisotropic in 2D.
pub fn total_variation(s: &Signal) -> f64 {
    let g = s.grid();
    let v = s.values();
    let (rows, cols) = (g.rows(), g.cols());
    let mut tv = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            let x = v[r * cols + c];
            if c + 1 < cols {
                tv += (v[r * cols + c + 1] - x).abs();
            }
            if r + 1 < rows {
                tv += (v[(r + 1) * cols + c] - x).abs();
            }
        }
    }
    tv
}

#[derive(Clone, Debug, Serialize)]
pub struct Metrics {
    pub map_rel_error: f64,
    pub cm_rel_error: f64,
    pub map_prior_energy: f64,
    pub cm_prior_energy: f64,
    pub map_tv: f64,
    pub cm_tv: f64,
    pub map_range: f64,
    pub cm_range: f64,
    /// `|û_MAP - û_CM|₂`.
    pub map_cm_distance: f64,
    /// `|û_MAP - ũ|₂` with the truth on the reconstruction grid.
    pub map_truth_distance: f64,
    pub cm_truth_distance: f64,
}

pub fn metrics(truth: &Signal, prior: &Prior, map: &Signal, cm: &Signal) -> Metrics {
    let t = truth.values();
    let tn = norm2(t).max(f64::MIN_POSITIVE);
    let map_truth = norm2(&sub(map.values(), t));
    let cm_truth = norm2(&sub(cm.values(), t));
    Metrics {
        map_rel_error: map_truth / tn,
        cm_rel_error: cm_truth / tn,
        map_prior_energy: prior.energy(map.values()),
        cm_prior_energy: prior.energy(cm.values()),
        map_tv: total_variation(map),
        cm_tv: total_variation(cm),
        map_range: map.range(),
        cm_range: cm.range(),
        map_cm_distance: norm2(&sub(map.values(), cm.values())),
        map_truth_distance: map_truth,
        cm_truth_distance: cm_truth,
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Verification {
    pub report: VerificationReport,
    pub average_optimality: Option<AverageOptimality>,
    pub inequalities: Option<TheoremIneqReport>,
    pub centered: Option<CenteredEnergyReport>,
    pub map_optimality: Option<OptimalityReport>,
    pub cm_optimality: Option<OptimalityReport>,
    /// Checks that could not be evaluated.
    pub errors: Vec<String>,
}

fn probe_margin(r: &OptimalityReport) -> (f64, f64) {
    r.probes
        .iter()
        .map(|p| (3.0 * p.stderr - p.improvement, p.stderr))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap_or((0.0, 0.0))
}

/// The full bayescost suite on one posterior and chain.
pub fn verify_all(cfg: &ScenarioConfig, post: &Posterior, map: &MapResult, cm: &CmStage) -> Verification {
    let mut v = Verification::default();
    let chain = &cm.chains[0];
    let seed = cfg.scenario.seed;
    let cm_est = cm.summary.mean.values();
    let note = |v: &mut Verification, name: &str, e: Error| {
        v.report.push(name, f64::NAN, f64::NAN, false, format!("error: {e}"));
        v.errors.push(format!("{name}: {e}"));
    };

    match average_optimality(post, chain) {
        Ok(a) => {
            v.report.push(
                "cm average optimality",
                3.0 * a.sup_stderr - a.sup_residual,
                a.sup_stderr,
                a.passed,
                format!("sup residual {:.3e}, max z {:.2}", a.sup_residual, a.max_z),
            );
            v.average_optimality = Some(a);
        }
        Err(e) => note(&mut v, "cm average optimality", e),
    }
    match theorem_ineq_check(chain, map.estimate.values(), cm_est, None, post.prior()) {
        Ok(r) => {
            for i in [&r.quadratic, &r.bregman] {
                v.report.push(i.name.clone(), i.margin, i.stderr, i.passed, format!("map {:.6e}, cm {:.6e}", i.map_value, i.cm_value));
            }
            v.inequalities = Some(r);
        }
        Err(e) => note(&mut v, "expected-error inequalities", e),
    }
    match centered_energy_check(post, map, cfg.verify.centered_points, derive_seed(seed, SeedStream::Centered)) {
        Ok(r) => {
            v.report
                .push("map-centered energy", r.tolerance - r.spread, 0.0, r.passed, format!("spread {:.3e}", r.spread));
            v.centered = Some(r);
        }
        Err(e) => note(&mut v, "map-centered energy", e),
    }
    if cfg.verify.n_probes > 0 {
        let probes = cfg.verify.n_probes;
        let scale = cfg.verify.probe_scale;
        let probe_seed = derive_seed(seed, SeedStream::Probes);
        let brg = CostSpec::bregman_for(post);
        match verify_bayes_optimality(chain, map.estimate.values(), &brg, probes, scale, probe_seed) {
            Ok(r) => {
                let (m, s) = probe_margin(&r);
                v.report.push("map optimal for bregman cost", m, s, r.passed, format!("{} failing probes", r.failures));
                v.map_optimality = Some(r);
            }
            Err(e) => note(&mut v, "map optimal for bregman cost", e),
        }
        let ls = CostSpec::ls_for(post, None, 1.0);
        match ls.and_then(|ls| verify_bayes_optimality(chain, cm_est, &ls, probes, scale, probe_seed)) {
            Ok(r) => {
                let (m, s) = probe_margin(&r);
                v.report.push("cm optimal for ls cost", m, s, r.passed, format!("{} failing probes", r.failures));
                v.cm_optimality = Some(r);
            }
            Err(e) => note(&mut v, "cm optimal for ls cost", e),
        }
    }
    if let Some(d) = &cm.discrepancy {
        v.report.push(
            "two-chain discrepancy",
            d.stderr_bound - d.sup_norm,
            d.stderr_bound / 3.0,
            d.sup_norm <= d.stderr_bound,
            format!("sup {:.3e}, rel l2 {:.3e}", d.sup_norm, d.rel_l2),
        );
    }
    v
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentRecord {
    pub scenario: String,
    pub config_hash: String,
    #[serde(skip)]
    pub truth: Signal,
    #[serde(skip)]
    pub truth_recon: Signal,
    #[serde(skip)]
    pub data: Signal,
    pub sigma: f64,
    pub lambda: f64,
    pub lambda_selection: Option<SCurveResult>,
    pub truth_sparsity: Option<f64>,
    pub map: MapResult,
    pub cm: ChainSummary,
    pub sampler: SamplerMethod,
    pub acceptance_rates: Vec<Option<f64>>,
    pub discrepancy: Option<Discrepancy>,
    pub metrics: Metrics,
    pub verification: Verification,
    /// Set when some verification step failed to run.
    pub partial: bool,
}

/// Pipeline stages; each includes everything before it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Scenario,
    Map,
    Cm,
    Estimate,
    Verify,
}

fn write_scenario(w: &mut ArtifactWriter, sc: &Scenario) -> Result<()> {
    w.text("config", "config.toml", "config", &sc.config.to_toml_string()?)?;
    w.signal("truth", &sc.truth)?;
    w.signal("truth_recon", &sc.truth_recon)?;
    w.signal("data", &sc.data.data)?;
    w.json("data_info", &sc.data)
}

fn write_map(w: &mut ArtifactWriter, m: &MapStage) -> Result<()> {
    w.signal("map", &m.map.estimate)?;
    m.map.write_trace_csv(&w.register("map_trace", "map_trace.csv", "csv"))?;
    w.json(
        "map_info",
        &serde_json::json!({
            "lambda": m.lambda,
            "sparsity": map_sparsity(&m.posterior, &m.map),
            "result": &m.map,
            "lambda_selection": &m.lambda_selection,
        }),
    )
}

fn write_cm(w: &mut ArtifactWriter, c: &CmStage) -> Result<()> {
    for (i, chain) in c.chains.iter().enumerate() {
        w.chain(&format!("chain_{i}"), chain)?;
    }
    w.signal("cm", &c.summary.mean)?;
    w.signal("cm_stderr", &Signal::new(*c.summary.mean.grid(), c.summary.stderr.clone())?)?;
    w.json("cm_info", &serde_json::json!({ "summary": &c.summary, "discrepancy": &c.discrepancy, "method": c.method }))
}

/// Runs the pipeline up to `stage` and writes its artifacts (with a manifest)
/// into `out_dir`.
pub fn run_stage(cfg: &ScenarioConfig, stage: Stage, out_dir: &Path) -> Result<Manifest> {
    let mut w = ArtifactWriter::new(out_dir, &cfg.scenario.name.to_string(), cfg.scenario.seed, &cfg.hash()?)?;
    if stage == Stage::Verify {
        let record = run_experiment_with(cfg, Some(&mut w))?;
        log::info!("verification: all passed = {}", record.verification.report.all_passed());
        return w.finish();
    }
    let sc = build_scenario(cfg)?;
    write_scenario(&mut w, &sc)?;
    if stage >= Stage::Map {
        let m = solve_stage(&sc)?;
        write_map(&mut w, &m)?;
        if stage >= Stage::Cm {
            let c = sample_stage(&sc, &m)?;
            write_cm(&mut w, &c)?;
            if stage >= Stage::Estimate {
                let met = metrics(&sc.truth_recon, m.posterior.prior(), &m.map.estimate, &c.summary.mean);
                w.json("metrics", &met)?;
            }
        }
    }
    w.finish()
}

/// Builds the scenario, solves MAP, samples the CM and runs every check.
pub fn run_experiment(cfg: &ScenarioConfig, out_dir: Option<&Path>) -> Result<ExperimentRecord> {
    match out_dir {
        Some(dir) => {
            let mut w = ArtifactWriter::new(dir, &cfg.scenario.name.to_string(), cfg.scenario.seed, &cfg.hash()?)?;
            let r = run_experiment_with(cfg, Some(&mut w))?;
            w.finish()?;
            Ok(r)
        }
        None => run_experiment_with(cfg, None),
    }
}

fn run_experiment_with(cfg: &ScenarioConfig, mut w: Option<&mut ArtifactWriter>) -> Result<ExperimentRecord> {
    let sc = build_scenario(cfg)?;
    let m = solve_stage(&sc)?;
    log::info!(
        "{}: lambda = {:.4e}, MAP {} iterations, residual {:.2e}",
        cfg.scenario.name,
        m.lambda,
        m.map.iterations,
        m.map.residual_norm
    );
    let c = sample_stage(&sc, &m)?;
    let met = metrics(&sc.truth_recon, m.posterior.prior(), &m.map.estimate, &c.summary.mean);
    let verification = verify_all(cfg, &m.posterior, &m.map, &c);
    if let Some(w) = w.as_deref_mut() {
        write_scenario(w, &sc)?;
        write_map(w, &m)?;
        write_cm(w, &c)?;
        w.json("metrics", &met)?;
        w.report("verification", &verification.report)?;
        w.json("verification_details", &verification)?;
    }
    let truth_sparsity = match cfg.prior.kind {
        PriorChoice::Besov | PriorChoice::L1 => Some(sc.truth_sparsity()?),
        _ => None,
    };
    let record = ExperimentRecord {
        scenario: cfg.scenario.name.to_string(),
        config_hash: cfg.hash()?,
        truth: sc.truth.clone(),
        truth_recon: sc.truth_recon.clone(),
        data: sc.data.data.clone(),
        sigma: sc.data.sigma,
        lambda: m.lambda,
        lambda_selection: m.lambda_selection.clone(),
        truth_sparsity,
        map: m.map.clone(),
        cm: c.summary.clone(),
        sampler: c.method,
        acceptance_rates: c.chains.iter().map(|ch| ch.acceptance_rate).collect(),
        discrepancy: c.discrepancy.clone(),
        metrics: met,
        partial: !verification.errors.is_empty(),
        verification,
    };
    if let Some(w) = w {
        w.json("record", &record)?;
    }
    Ok(record)
}
