//! Discretization sweep for the TV prior: the same data reconstructed on
//! grids of growing size `n`, with λ held constant or grown like `√(n+1)`.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use super::artifacts::{ArtifactWriter, Manifest};
use super::config::ScenarioConfig;
use super::data::{generate_data, GeneratedData};
use super::lambda::lambda_sqrt_rule;
use super::phantoms::build_indicator_1d;
use super::run::{derive_seed, sample_chains, total_variation, SeedStream};
use crate::error::{Error, Result};
use crate::grid::{Grid, Signal};
use crate::map_solver::solve_map;
use crate::noise::GaussianNoiseModel;
use crate::operators::{interval_integration, Identity};
use crate::posterior::Posterior;
use crate::priors::Prior;
use crate::sampler::{average_optimality, summarize, two_chain_discrepancy, AverageOptimality, Discrepancy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaScaling {
    Constant,
    Sqrt,
}

impl std::fmt::Display for LambdaScaling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LambdaScaling::Constant => "const",
            LambdaScaling::Sqrt => "sqrt",
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DilemmaRow {
    pub scaling: LambdaScaling,
    pub n: usize,
    pub lambda: f64,
    pub map_range: f64,
    pub map_tv: f64,
    pub map_converged: bool,
    pub map_residual: f64,
    pub cm_range: Option<f64>,
    pub cm_tv: Option<f64>,
    pub discrepancy: Option<Discrepancy>,
    pub average_optimality: Option<AverageOptimality>,
    #[serde(skip)]
    pub map: Signal,
    #[serde(skip)]
    pub cm: Option<Signal>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DilemmaRecord {
    pub sigma: f64,
    pub rows: Vec<DilemmaRow>,
    /// Sup-range of the MAP under `λ ∝ √(n+1)` never grows with `n`.
    pub sqrt_map_range_nonincreasing: bool,
    /// TV of the CM under constant λ never decreases with `n`.
    pub const_cm_tv_nondecreasing: Option<bool>,
    /// Relative TV change of the constant-λ MAP between the two finest levels.
    pub const_map_tv_rel_change: f64,
    pub const_map_tv_stable: bool,
}

impl DilemmaRecord {
    pub fn rows_for(&self, scaling: LambdaScaling) -> impl Iterator<Item = &DilemmaRow> {
        self.rows.iter().filter(move |r| r.scaling == scaling)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("scaling,n,lambda,map_range,map_tv,cm_range,cm_tv,discrepancy_sup,discrepancy_bound,avg_opt_residual,avg_opt_stderr\n");
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.scaling,
                r.n,
                r.lambda,
                r.map_range,
                r.map_tv,
                opt(r.cm_range),
                opt(r.cm_tv),
                opt(r.discrepancy.as_ref().map(|d| d.sup_norm)),
                opt(r.discrepancy.as_ref().map(|d| d.stderr_bound)),
                opt(r.average_optimality.as_ref().map(|a| a.sup_residual)),
                opt(r.average_optimality.as_ref().map(|a| a.sup_stderr)),
            );
        }
        out
    }
}

/// Data from the indicator of `[1/3, 2/3]` on `truth_cells` cells, averaged
/// over the configured number of intervals. Shared by every level.
pub fn dilemma_data(cfg: &ScenarioConfig) -> Result<GeneratedData> {
    let d = &cfg.dilemma;
    let m = cfg.forward.intervals;
    let fine = Grid::new_1d(d.truth_cells)?;
    let truth = build_indicator_1d(fine)?;
    generate_data(
        &truth,
        &interval_integration(d.truth_cells, m)?,
        &Identity::new(m),
        cfg.noise.fraction,
        derive_seed(cfg.scenario.seed, SeedStream::Noise),
        Grid::new_1d(m)?,
    )
}

pub fn dilemma_posterior(data: &GeneratedData, n: usize, lambda: f64) -> Result<Posterior> {
    let m = data.data.len();
    Posterior::new(
        Grid::new_1d(n)?,
        Arc::new(interval_integration(n, m)?),
        data.data.clone(),
        GaussianNoiseModel::from_sigma(m, data.sigma)?,
        Prior::tv1d(n, lambda)?,
    )
}

fn non_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

pub fn run_dilemma(cfg: &ScenarioConfig, out_dir: Option<&Path>) -> Result<(DilemmaRecord, Option<Manifest>)> {
    cfg.validate()?;
    let d = &cfg.dilemma;
    if d.levels.is_empty() {
        return Err(Error::Config("dilemma needs at least one level".into()));
    }
    let data = dilemma_data(cfg)?;
    let opts = cfg.solver.options();
    let mut rows = Vec::new();
    for scaling in [LambdaScaling::Sqrt, LambdaScaling::Constant] {
        for &n in &d.levels {
            let lambda = match scaling {
                LambdaScaling::Constant => d.lambda_const,
                LambdaScaling::Sqrt => lambda_sqrt_rule(n, d.sqrt_c)?,
            };
            let post = dilemma_posterior(&data, n, lambda)?;
            let map = solve_map(&post, &opts)?;
            log::info!(
                "dilemma {scaling} n = {n}: lambda = {lambda:.4}, MAP {} iterations, residual {:.2e}",
                map.iterations,
                map.residual_norm
            );
            let mut row = DilemmaRow {
                scaling,
                n,
                lambda,
                map_range: map.estimate.range(),
                map_tv: total_variation(&map.estimate),
                map_converged: map.converged,
                map_residual: map.residual_norm,
                cm_range: None,
                cm_tv: None,
                discrepancy: None,
                average_optimality: None,
                map: map.estimate.clone(),
                cm: None,
            };
            if scaling == LambdaScaling::Constant || d.sample_sqrt_rule {
                let (chains, _) = sample_chains(cfg, &post, map.estimate.values())?;
                let s = summarize(&chains[0], post.prior())?;
                row.cm_range = Some(s.mean.range());
                row.cm_tv = Some(total_variation(&s.mean));
                row.average_optimality = Some(average_optimality(&post, &chains[0])?);
                if let Some(b) = chains.get(1) {
                    row.discrepancy = Some(two_chain_discrepancy(&chains[0], b)?);
                }
                row.cm = Some(s.mean);
            }
            rows.push(row);
        }
    }

    let series = |scaling, f: &dyn Fn(&DilemmaRow) -> Option<f64>| -> Vec<f64> {
        rows.iter().filter(|r| r.scaling == scaling).filter_map(f).collect()
    };
    let sqrt_ranges = series(LambdaScaling::Sqrt, &|r| Some(r.map_range));
    let const_cm_tv = series(LambdaScaling::Constant, &|r| r.cm_tv);
    let const_map_tv = series(LambdaScaling::Constant, &|r| Some(r.map_tv));
    let neg: Vec<f64> = const_cm_tv.iter().map(|x| -x).collect();
    let rel_change = match const_map_tv.as_slice() {
        [.., a, b] => (b - a).abs() / a.abs().max(f64::MIN_POSITIVE),
        _ => 0.0,
    };
    let record = DilemmaRecord {
        sigma: data.sigma,
        sqrt_map_range_nonincreasing: non_increasing(&sqrt_ranges),
        const_cm_tv_nondecreasing: (!const_cm_tv.is_empty()).then(|| non_increasing(&neg)),
        const_map_tv_rel_change: rel_change,
        const_map_tv_stable: rel_change < 0.1,
        rows,
    };

    let manifest = match out_dir {
        Some(dir) => {
            let mut w = ArtifactWriter::new(dir, "dilemma", cfg.scenario.seed, &cfg.hash()?)?;
            w.text("config", "config.toml", "config", &cfg.to_toml_string()?)?;
            w.signal("data", &data.data)?;
            for r in &record.rows {
                w.signal(&format!("map_{}_{}", r.scaling, r.n), &r.map)?;
                if let Some(cm) = &r.cm {
                    w.signal(&format!("cm_{}_{}", r.scaling, r.n), cm)?;
                }
            }
            w.text("dilemma", "dilemma.csv", "csv", &record.to_csv())?;
            w.json("dilemma", &record)?;
            Some(w.finish()?)
        }
        None => None,
    };
    Ok((record, manifest))
}
