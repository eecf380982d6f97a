use serde::Serialize;

use crate::error::{Error, Result};
use crate::map_solver::{solve_map, MapResult, SolverOptions};
use crate::posterior::Posterior;

/// `λ_n = c √(n + 1)`.
pub fn lambda_sqrt_rule(n: usize, c: f64) -> Result<f64> {
    if n < 2 || !(c > 0.0) {
        return Err(Error::InvalidParameter(format!("sqrt rule needs n >= 2 and c > 0 (got n = {n}, c = {c})")));
    }
    Ok(c * ((n + 1) as f64).sqrt())
}

/// Relative threshold below which a coefficient counts as zero.
pub const SPARSITY_THRESHOLD: f64 = 1e-8;

/// Fraction of entries with `|c| > 1e-8 max|c|`; 0 for the zero vector.
pub fn sparsity_fraction(coefficients: &[f64]) -> f64 {
    let max = coefficients.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    if max == 0.0 || coefficients.is_empty() {
        return 0.0;
    }
    let nonzero = coefficients.iter().filter(|c| c.abs() > SPARSITY_THRESHOLD * max).count();
    nonzero as f64 / coefficients.len() as f64
}

/// Transform-coefficient sparsity of a MAP estimate, using the solver's exact
/// split coefficients when available.
pub fn map_sparsity(post: &Posterior, map: &MapResult) -> f64 {
    match &map.coefficients {
        Some(c) => sparsity_fraction(c),
        None => sparsity_fraction(&post.prior().coefficients(map.estimate.values())),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SCurveResult {
    pub lambda: f64,
    pub sparsity: f64,
    pub target: f64,
    /// Every `(λ, sparsity)` evaluated, in evaluation order.
    pub evaluations: Vec<(f64, f64)>,
    /// Whether the evaluated sparsities are non-increasing in λ.
    pub monotone: bool,
    #[serde(skip)]
    pub map: MapResult,
}

const MAX_BISECTIONS: usize = 40;

/// S-curve λ selection: bisection on `log λ` until the MAP estimate's nonzero
/// coefficient fraction matches `target` within `tol`. The sparsity is
/// assumed non-increasing in λ; the collected sweep records whether it was.
pub fn s_curve_select_lambda(
    factory: impl Fn(f64) -> Result<Posterior>,
    target: f64,
    bracket: (f64, f64),
    tol: f64,
    opts: &SolverOptions,
) -> Result<SCurveResult> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidParameter(format!("target sparsity must lie in (0, 1), got {target}")));
    }
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo && tol > 0.0) {
        return Err(Error::InvalidParameter(format!("invalid bracket {bracket:?} or tolerance {tol}")));
    }
    let mut evaluations = Vec::new();
    let mut eval = |lambda: f64| -> Result<(f64, MapResult)> {
        let post = factory(lambda)?;
        let map = solve_map(&post, opts)?;
        let s = map_sparsity(&post, &map);
        log::info!("s-curve: lambda = {lambda:.6e}, sparsity = {s:.4}");
        evaluations.push((lambda, s));
        Ok((s, map))
    };
    let (s_lo, map_lo) = eval(lo)?;
    if (s_lo - target).abs() <= tol {
        return finish(lo, s_lo, target, map_lo, evaluations);
    }
    let (s_hi, map_hi) = eval(hi)?;
    if (s_hi - target).abs() <= tol {
        return finish(hi, s_hi, target, map_hi, evaluations);
    }
    if !(s_lo > target && s_hi < target) {
        return Err(Error::BracketMismatch {
            lo: s_lo,
            hi: s_hi,
            target,
        });
    }
    let mut best = if (s_lo - target).abs() < (s_hi - target).abs() { (lo, s_lo, map_lo) } else { (hi, s_hi, map_hi) };
    for _ in 0..MAX_BISECTIONS {
        let mid = (lo * hi).sqrt();
        let (s, map) = eval(mid)?;
        let hit = (s - target).abs() <= tol;
        if s > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if (s - target).abs() < (best.1 - target).abs() || hit {
            best = (mid, s, map);
        }
        if hit || hi / lo < 1.0 + 1e-10 {
            break;
        }
    }
    let (lambda, s, map) = best;
    finish(lambda, s, target, map, evaluations)
}

fn finish(lambda: f64, sparsity: f64, target: f64, map: MapResult, evaluations: Vec<(f64, f64)>) -> Result<SCurveResult> {
    let mut sorted = evaluations.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let monotone = sorted.windows(2).all(|w| w[1].1 <= w[0].1);
    Ok(SCurveResult {
        lambda,
        sparsity,
        target,
        evaluations,
        monotone,
        map,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::grid::{Grid, Signal};
    use crate::noise::GaussianNoiseModel;
    use crate::operators::Identity;
    use crate::priors::Prior;

    #[test]
    fn sqrt_rule_examples() {
        assert_eq!(lambda_sqrt_rule(3, 1.0).unwrap(), 2.0);
        assert_eq!(lambda_sqrt_rule(63, 1.0).unwrap(), 8.0);
        assert_eq!(lambda_sqrt_rule(63, 2.0).unwrap(), 2.0 * lambda_sqrt_rule(63, 1.0).unwrap());
        assert!(lambda_sqrt_rule(1, 1.0).is_err());
        assert!(lambda_sqrt_rule(5, 0.0).is_err());
    }

    #[test]
    fn sparsity_examples() {
        assert_eq!(sparsity_fraction(&[0.0, 0.0]), 0.0);
        assert_eq!(sparsity_fraction(&[1.0, 0.0, -2.0, 1e-12]), 0.5);
    }

    fn denoise(f: Vec<f64>) -> impl Fn(f64) -> Result<Posterior> {
        move |lambda| {
            let n = f.len();
            let g = Grid::new_1d(n).unwrap();
            Posterior::new(
                g,
                Arc::new(Identity::new(n)),
                Signal::new(g, f.clone())?,
                GaussianNoiseModel::from_sigma(n, 1.0)?,
                Prior::l1(n, lambda, None)?,
            )
        }
    }

    #[test]
    fn scalar_threshold_kills_estimate() {
        let post = denoise(vec![2.0])(2.5).unwrap();
        let map = solve_map(&post, &SolverOptions::default()).unwrap();
        assert_eq!(map_sparsity(&post, &map), 0.0);
    }

    #[test]
    fn bisection_hits_target() {
        // soft thresholding of 1..=10: λ in (k, k+1) keeps 10 - k entries
        let f: Vec<f64> = (1..=10).map(|k| k as f64).collect();
        let r = s_curve_select_lambda(denoise(f), 0.3, (0.5, 20.0), 1e-9, &SolverOptions::default()).unwrap();
        assert!((r.sparsity - 0.3).abs() < 1e-9);
        assert!(r.lambda > 7.0 && r.lambda < 8.0, "{}", r.lambda);
        assert!(r.monotone);
        // the upper end is at or below the target
        assert!(r.evaluations[1].1 <= 0.3);
    }

    #[test]
    fn bisection_fixed_point_at_midpoint() {
        let f: Vec<f64> = (1..=10).map(|k| k as f64).collect();
        let mid = (2.0f64 * 12.0).sqrt();
        let post = denoise(f.clone())(mid).unwrap();
        let target = map_sparsity(&post, &solve_map(&post, &SolverOptions::default()).unwrap());
        let r = s_curve_select_lambda(denoise(f), target, (2.0, 12.0), 1e-9, &SolverOptions::default()).unwrap();
        assert_eq!(r.sparsity, target);
        assert!(r.lambda > 4.0 && r.lambda < 5.0);
    }

    #[test]
    fn bracket_must_straddle() {
        let f: Vec<f64> = (1..=10).map(|k| k as f64).collect();
        let r = s_curve_select_lambda(denoise(f), 0.3, (11.0, 20.0), 1e-3, &SolverOptions::default());
        assert!(matches!(r, Err(Error::BracketMismatch { .. })));
    }
}
