//! Scenario configuration files.
//!
//! A config is TOML: `[section]` headers followed by `key = value` lines.
//! `[scenario] name` picks a preset (`deblur2d`, `tv1d`, `ct2d`) whose values
//! every other section may override key by key; `custom` has no preset, so
//! every section must be spelled out. Unknown sections and keys are errors.
//!
//! ```toml
//! [scenario]
//! name = "deblur2d"
//! seed = 7
//!
//! [lambda]
//! rule = "fixed"
//! value = 25.0
//!
//! [sampler]
//! n_samples = 2000
//! thinning = 5
//! ```
//!
//! Sections and keys (all keys of a section are required for `custom`):
//!
//! - `scenario`: `name`, `seed`
//! - `grid`: `size` (side of the reconstruction grid, or its length in 1D),
//!   `truth_factor` (truth grid refinement, integer ≥ 1)
//! - `phantom`: `kind` (`spots` | `indicator` | `shepp_logan`), `n_spots`,
//!   `radius_min`, `radius_max`, `intensity_min`, `intensity_max`, `gap`,
//!   `table` (`standard` | `modified`)
//! - `forward`: `kind` (`blur` | `integration` | `radon` | `identity`),
//!   `blur_sigma`, `intervals`, `angles`, `bins`
//! - `noise`: `fraction` (σ as a fraction of the noiseless data's sup-norm)
//! - `prior`: `kind` (`gaussian` | `l1` | `tv` | `besov`), `beta`,
//!   optional `haar_levels`
//! - `lambda`: `rule` (`fixed` | `sqrt_n` | `s_curve`), `value`, `c`,
//!   `bracket`, `tol`, optional `target_sparsity`
//! - `solver`: `max_iters`, `tol_rel_change`, `tol_residual`, `cg_rel_tol`,
//!   `cg_max_iters`, optional `penalty` (all optional)
//! - `sampler`: `method` (`auto` | `gibbs` | `rwm`), `n_samples`, `thinning`,
//!   `chains`, `rwm_step`, `rwm_mode` (`componentwise` | `full_vector`),
//!   optional `burn_in`
//! - `verify`: `n_probes`, `probe_scale`, `centered_points`
//! - `dilemma`: `levels`, `truth_cells`, `lambda_const`, `sqrt_c`,
//!   `sample_sqrt_rule`

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::phantoms::SheppLoganTable;
use crate::error::{Error, Result};
use crate::map_solver::SolverOptions;
use crate::sampler::RwmMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    Deblur2d,
    Tv1d,
    Ct2d,
    Custom,
}

impl std::fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScenarioName::Deblur2d => "deblur2d",
            ScenarioName::Tv1d => "tv1d",
            ScenarioName::Ct2d => "ct2d",
            ScenarioName::Custom => "custom",
        })
    }
}

impl std::str::FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deblur2d" => Ok(ScenarioName::Deblur2d),
            "tv1d" => Ok(ScenarioName::Tv1d),
            "ct2d" => Ok(ScenarioName::Ct2d),
            "custom" => Ok(ScenarioName::Custom),
            other => Err(Error::Config(format!("unknown scenario {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub name: ScenarioName,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub size: usize,
    pub truth_factor: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhantomKind {
    Spots,
    Indicator,
    SheppLogan,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSection {
    pub kind: PhantomKind,
    pub n_spots: usize,
    pub radius_min: f64,
    pub radius_max: f64,
    pub intensity_min: f64,
    pub intensity_max: f64,
    pub gap: f64,
    pub table: SheppLoganTable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForwardKind {
    Blur,
    Integration,
    Radon,
    Identity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForwardSection {
    pub kind: ForwardKind,
    pub blur_sigma: f64,
    pub intervals: usize,
    pub angles: usize,
    pub bins: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub fraction: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorChoice {
    Gaussian,
    L1,
    Tv,
    Besov,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSection {
    pub kind: PriorChoice,
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub haar_levels: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaRule {
    Fixed,
    SqrtN,
    SCurve,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaSection {
    pub rule: LambdaRule,
    pub value: f64,
    pub c: f64,
    pub bracket: [f64; 2],
    pub tol: f64,
    /// Defaults to the truth's own coefficient sparsity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_sparsity: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    /// Gibbs when the prior allows it, componentwise RWM otherwise.
    Auto,
    Gibbs,
    Rwm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    pub method: MethodChoice,
    pub n_samples: usize,
    pub thinning: usize,
    pub chains: usize,
    pub rwm_step: f64,
    pub rwm_mode: RwmMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub n_probes: usize,
    pub probe_scale: f64,
    pub centered_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DilemmaSection {
    pub levels: Vec<usize>,
    pub truth_cells: usize,
    pub lambda_const: f64,
    pub sqrt_c: f64,
    pub sample_sqrt_rule: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioSection,
    pub grid: GridSection,
    pub phantom: PhantomSection,
    pub forward: ForwardSection,
    pub noise: NoiseSection,
    pub prior: PriorSection,
    pub lambda: LambdaSection,
    #[serde(default)]
    pub solver: SolverParams,
    pub sampler: SamplerSection,
    pub verify: VerifySection,
    pub dilemma: DilemmaSection,
}

/// Solver keys as they appear in config files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub penalty: Option<f64>,
    pub max_iters: usize,
    pub tol_rel_change: f64,
    pub tol_residual: f64,
    pub cg_rel_tol: f64,
    pub cg_max_iters: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self {
            penalty: d.penalty,
            max_iters: d.max_iters,
            tol_rel_change: d.tol_rel_change,
            tol_residual: d.tol_residual,
            cg_rel_tol: d.cg_rel_tol,
            cg_max_iters: d.cg_max_iters,
        }
    }
}

impl SolverParams {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            penalty: self.penalty,
            max_iters: self.max_iters,
            tol_rel_change: self.tol_rel_change,
            tol_residual: self.tol_residual,
            cg_rel_tol: self.cg_rel_tol,
            cg_max_iters: self.cg_max_iters,
            trace_path: None,
        }
    }
}

fn default_spots() -> PhantomSection {
    PhantomSection {
        kind: PhantomKind::Spots,
        n_spots: 20,
        radius_min: 0.008,
        radius_max: 0.012,
        intensity_min: 0.8,
        intensity_max: 1.0,
        gap: 0.02,
        table: SheppLoganTable::Standard,
    }
}

fn default_dilemma() -> DilemmaSection {
    DilemmaSection {
        levels: vec![63, 255, 1023, 4095],
        truth_cells: 16384,
        lambda_const: 100.0,
        sqrt_c: 12.5,
        sample_sqrt_rule: false,
    }
}

fn default_verify() -> VerifySection {
    VerifySection {
        n_probes: 50,
        probe_scale: 1.0,
        centered_points: 100,
    }
}

impl ScenarioConfig {
    /// The preset for `name`; `None` for `custom`.
    pub fn preset(name: ScenarioName) -> Option<ScenarioConfig> {
        let forward = |kind| ForwardSection {
            kind,
            blur_sigma: 0.015,
            intervals: 32,
            angles: 15,
            bins: 95,
        };
        let sampler = |n_samples, thinning| SamplerSection {
            method: MethodChoice::Auto,
            n_samples,
            thinning,
            chains: 2,
            rwm_step: 1.0,
            rwm_mode: RwmMode::Componentwise,
            burn_in: None,
        };
        let lambda = |rule, value| LambdaSection {
            rule,
            value,
            c: 12.5,
            bracket: [0.01, 100.0],
            tol: 0.01,
            target_sparsity: None,
        };
        let cfg = match name {
            ScenarioName::Deblur2d => ScenarioConfig {
                scenario: ScenarioSection { name, seed: 1 },
                grid: GridSection {
                    size: 64,
                    truth_factor: 4,
                },
                phantom: default_spots(),
                forward: forward(ForwardKind::Blur),
                noise: NoiseSection { fraction: 0.1 },
                prior: PriorSection {
                    kind: PriorChoice::L1,
                    beta: 1.0,
                    haar_levels: None,
                },
                lambda: lambda(LambdaRule::Fixed, 40.0),
                solver: SolverParams::default(),
                sampler: sampler(2000, 5),
                verify: default_verify(),
                dilemma: default_dilemma(),
            },
            ScenarioName::Tv1d => ScenarioConfig {
                scenario: ScenarioSection { name, seed: 1 },
                grid: GridSection {
                    size: 255,
                    truth_factor: 4,
                },
                phantom: PhantomSection {
                    kind: PhantomKind::Indicator,
                    ..default_spots()
                },
                forward: forward(ForwardKind::Integration),
                noise: NoiseSection { fraction: 0.05 },
                prior: PriorSection {
                    kind: PriorChoice::Tv,
                    beta: 1.0,
                    haar_levels: None,
                },
                lambda: lambda(LambdaRule::Fixed, 100.0),
                solver: SolverParams::default(),
                sampler: sampler(4000, 10),
                verify: default_verify(),
                dilemma: default_dilemma(),
            },
            ScenarioName::Ct2d => ScenarioConfig {
                scenario: ScenarioSection { name, seed: 1 },
                grid: GridSection {
                    size: 64,
                    truth_factor: 4,
                },
                phantom: PhantomSection {
                    kind: PhantomKind::SheppLogan,
                    ..default_spots()
                },
                forward: forward(ForwardKind::Radon),
                noise: NoiseSection { fraction: 0.01 },
                prior: PriorSection {
                    kind: PriorChoice::Besov,
                    beta: 1.0,
                    haar_levels: None,
                },
                lambda: LambdaSection {
                    bracket: [1e-3, 10.0],
                    ..lambda(LambdaRule::SCurve, 1.0)
                },
                // the CT normal operator is badly conditioned; inexact inner
                // solves with more outer iterations are much cheaper
                solver: SolverParams {
                    cg_max_iters: 50,
                    ..SolverParams::default()
                },
                sampler: sampler(2000, 5),
                verify: default_verify(),
                dilemma: default_dilemma(),
            },
            ScenarioName::Custom => return None,
        };
        Some(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<ScenarioConfig> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let name = user
            .get("scenario")
            .and_then(|s| s.get("name"))
            .and_then(|n| n.as_str())
            .ok_or_else(|| Error::Config("missing [scenario] name".into()))?;
        let name: ScenarioName = name.parse()?;
        let merged = match Self::preset(name) {
            Some(preset) => {
                let mut base: toml::Table = toml::to_string(&preset)
                    .map_err(|e| Error::Config(e.to_string()))?
                    .parse()
                    .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
                merge(&mut base, user);
                base
            }
            None => user,
        };
        let text = toml::to_string(&merged).map_err(|e| Error::Config(e.to_string()))?;
        let cfg: ScenarioConfig = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<ScenarioConfig> {
        let text = fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Canonical TOML text of the fully resolved config.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 (hex) of the canonical TOML text.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml_string()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.noise.fraction > 0.0 && self.noise.fraction.is_finite()) {
            return bad(format!("noise fraction must be positive, got {}", self.noise.fraction));
        }
        if self.grid.truth_factor < 1 {
            return bad("truth_factor must be an integer >= 1".into());
        }
        if self.grid.size < 2 {
            return bad(format!("grid size must be at least 2, got {}", self.grid.size));
        }
        if self.sampler.n_samples == 0 || self.sampler.thinning == 0 || self.sampler.chains == 0 {
            return bad("sampler n_samples, thinning and chains must be positive".into());
        }
        if !(self.sampler.rwm_step > 0.0) {
            return bad("rwm_step must be positive".into());
        }
        if !(self.prior.beta >= 0.0) {
            return bad("prior beta must be >= 0".into());
        }
        let l = &self.lambda;
        match l.rule {
            LambdaRule::Fixed if !(l.value > 0.0) => return bad("lambda value must be positive".into()),
            LambdaRule::SqrtN if !(l.c > 0.0) => return bad("lambda c must be positive".into()),
            LambdaRule::SCurve if !(l.bracket[0] > 0.0 && l.bracket[1] > l.bracket[0] && l.tol > 0.0) => {
                return bad(format!("invalid s-curve bracket {:?} / tol {}", l.bracket, l.tol))
            }
            _ => {}
        }
        if let Some(t) = l.target_sparsity {
            if !(t > 0.0 && t < 1.0) {
                return bad(format!("target_sparsity must lie in (0, 1), got {t}"));
            }
        }
        if self.verify.probe_scale <= 0.0 {
            return bad("probe_scale must be positive".into());
        }
        let d = &self.dilemma;
        if d.levels.iter().any(|n| *n < 2) || !(d.lambda_const > 0.0 && d.sqrt_c > 0.0) || d.truth_cells == 0 {
            return bad("invalid dilemma section".into());
        }
        Ok(())
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
