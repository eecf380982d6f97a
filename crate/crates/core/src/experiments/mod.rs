//! Scenario builders, data generation, λ selection and the three experiment
//! pipelines (2D deblurring, the 1D TV discretization sweep, limited-angle CT).

mod artifacts;
pub mod config;
mod data;
mod dilemma;
mod lambda;
mod phantoms;
mod run;

pub use artifacts::{ArtifactWriter, Manifest, ManifestEntry};
pub use config::ScenarioConfig;
pub use data::{generate_data, GeneratedData};
pub use dilemma::{dilemma_data, dilemma_posterior, run_dilemma, DilemmaRecord, DilemmaRow, LambdaScaling};
pub use lambda::{lambda_sqrt_rule, map_sparsity, s_curve_select_lambda, sparsity_fraction, SCurveResult, SPARSITY_THRESHOLD};
pub use phantoms::{
    build_indicator_1d, build_shepp_logan, build_spots_phantom, build_spots_phantom_with, place_spots, rasterize_disks, Disk,
    SheppLoganTable, SpotRanges,
};
pub use run::{
    build_prior, build_scenario, derive_seed, metrics, run_experiment, run_stage, sample_chains, sample_stage, solve_stage,
    total_variation, verify_all, CmStage, ExperimentRecord, MapStage, Metrics, Scenario, SeedStream, Stage, Verification,
};
