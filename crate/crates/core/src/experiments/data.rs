use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::grid::{Grid, Signal};
use crate::operators::LinearOperator;
use crate::vecops::norm_inf;

#[derive(Clone, Debug, Serialize)]
pub struct GeneratedData {
    #[serde(skip)]
    pub data: Signal,
    #[serde(skip)]
    pub noiseless: Vec<f64>,
    /// Noise standard deviation actually used.
    pub sigma: f64,
}

/// `f = R(K_fine ũ) + ε` with `ε ~ N(0, σ² I)` and
/// `σ = noise_fraction · |R(K_fine ũ)|_∞`. The fine forward operator never
/// touches the reconstruction grid, which keeps data generation free of the
/// inverse crime.
pub fn generate_data(
    truth: &Signal,
    k_fine: &dyn LinearOperator,
    restrict: &dyn LinearOperator,
    noise_fraction: f64,
    seed: u64,
    data_grid: Grid,
) -> Result<GeneratedData> {
    check_dim("generate_data: truth", k_fine.in_dim(), truth.len())?;
    check_dim("generate_data: restriction", restrict.in_dim(), k_fine.out_dim())?;
    check_dim("generate_data: data grid", data_grid.len(), restrict.out_dim())?;
    if !(noise_fraction >= 0.0 && noise_fraction.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise fraction must be >= 0, got {noise_fraction}")));
    }
    let noiseless = restrict.apply(&k_fine.apply(truth.values()));
    let peak = norm_inf(&noiseless);
    if peak == 0.0 {
        return Err(Error::ZeroForwardImage);
    }
    let sigma = noise_fraction * peak;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = noiseless
        .iter()
        .map(|v| {
            let z: f64 = StandardNormal.sample(&mut rng);
            v + sigma * z
        })
        .collect();
    Ok(GeneratedData {
        data: Signal::new(data_grid, values)?,
        noiseless,
        sigma,
    })
}
