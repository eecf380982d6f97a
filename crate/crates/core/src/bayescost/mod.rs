//! Bayes costs and executable checks of the MAP/CM optimality results.
//!
//! All comparisons between estimates are made on one chain (common random
//! numbers): differences of costs are averaged per sample, which removes most
//! of the Monte Carlo variance shared by both sides.

mod checks;
mod cost;
mod report;

pub use checks::{
    centered_energy_check, theorem_ineq_check, uniform_cost_diagnostic, verify_bayes_optimality, CenteredEnergyReport,
    InequalityResult, OptimalityReport, ProbeResult, TheoremIneqReport, UniformCostDiagnostic, UniformCostPoint,
    PROBE_SCALES,
};
pub use cost::{cost_bregman, cost_ls, cost_uniform, mc_bayes_cost, CostEvaluator, CostKind, CostReport, CostSpec};
pub use report::{CheckRecord, VerificationReport};

#[cfg(test)]
mod tests;
