//! Coordinate-wise view of the posterior energy.
//!
//! The sampler works in coordinates `c` with `u = B^T c` for an orthonormal
//! `B` (the identity, or the wavelet transform of a Besov prior). Along a
//! single coordinate the energy is `a t² + b t + Σ c_k |t - d_k|`; the engine
//! keeps the residual `K u - f` (and `L u` for Gaussian priors) up to date so
//! each conditional costs one sparse column.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::operators::{extract_columns, Composed, LinearOperator, Operator, SparseColumns};
use crate::posterior::Posterior;
use crate::priors::PriorKind;

enum PriorTerms {
    /// `½β |L u|²` with `s = L u` maintained.
    Gaussian {
        beta: f64,
        l: Option<SparseColumns>,
        l_sq: Vec<f64>,
        s: Vec<f64>,
    },
    /// `λ w_j |c_j|` in the coefficient coordinates.
    L1 { scaled_weights: Vec<f64> },
    /// `λ Σ |u_{i+1} - u_i|` in pixel coordinates.
    Tv { lambda: f64 },
}

pub(crate) struct Engine<'a> {
    post: &'a Posterior,
    basis: Option<Operator>,
    cols: SparseColumns,
    precision: Vec<f64>,
    a_data: Vec<f64>,
    coords: Vec<f64>,
    resid: Vec<f64>,
    prior: PriorTerms,
}

/// One coordinate's conditional energy.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Conditional {
    pub a: f64,
    pub b: f64,
    pub kinks: [(f64, f64); 2],
    pub n_kinks: usize,
}

impl Conditional {
    pub fn kinks(&self) -> &[(f64, f64)] {
        &self.kinks[..self.n_kinks]
    }

    pub fn energy(&self, t: f64) -> f64 {
        super::conditional::PiecewiseGaussian::energy(self.a, self.b, self.kinks(), t)
    }
}

impl<'a> Engine<'a> {
    /// `allow_transform` admits orthonormal-transform ℓ1 priors; otherwise only
    /// pixel-domain priors are accepted.
    pub fn new(post: &'a Posterior, start: &[f64], allow_transform: bool) -> Result<Self> {
        let n = post.dim();
        let precision = post
            .noise()
            .diagonal_precision()
            .ok_or_else(|| Error::UnsupportedPrior("componentwise sampling needs a diagonal noise precision".into()))?
            .to_vec();
        let lambda = post.lambda();
        let (basis, prior) = match post.prior().kind() {
            PriorKind::Gaussian { beta, l } => {
                let l = l.as_ref().map(|op| extract_columns(op.as_ref()));
                let l_sq = match &l {
                    Some(cols) => (0..n).map(|j| cols.weighted_sq_norm(j, None)).collect(),
                    None => vec![1.0; n],
                };
                (
                    None,
                    PriorTerms::Gaussian {
                        beta: *beta,
                        l,
                        l_sq,
                        s: Vec::new(),
                    },
                )
            }
            PriorKind::L1 { transform, .. } => {
                let weights = post.prior().coefficient_weights();
                let scaled: Vec<f64> = weights.iter().map(|w| lambda * w).collect();
                match transform {
                    None => (None, PriorTerms::L1 { scaled_weights: scaled }),
                    Some(t) if allow_transform && t.is_orthonormal() && t.out_dim() == n => {
                        (Some(t.clone()), PriorTerms::L1 { scaled_weights: scaled })
                    }
                    Some(t) => {
                        return Err(Error::UnsupportedPrior(format!(
                            "componentwise conditionals are not piecewise Gaussian for an l1 prior on {}",
                            t.name()
                        )))
                    }
                }
            }
            PriorKind::Tv1d => (None, PriorTerms::Tv { lambda }),
        };

        let k_eff: Operator = match &basis {
            None => post.operator().clone(),
            Some(b) => Arc::new(Composed::new(post.operator().clone(), Arc::new(Transposed(b.clone())))?),
        };
        let cols = extract_columns(k_eff.as_ref());
        let a_data: Vec<f64> = (0..n).map(|j| 0.5 * cols.weighted_sq_norm(j, Some(&precision))).collect();
        let coords = match &basis {
            None => start.to_vec(),
            Some(b) => b.apply(start),
        };
        let mut engine = Engine {
            post,
            basis,
            cols,
            precision,
            a_data,
            coords,
            resid: Vec::new(),
            prior,
        };
        engine.refresh();
        Ok(engine)
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Recomputes the maintained quantities from the coordinates.
    pub fn refresh(&mut self) {
        let u = self.pixels();
        self.resid = self.post.residual(&u);
        if let PriorTerms::Gaussian { l, s, .. } = &mut self.prior {
            *s = match l {
                None => u.clone(),
                Some(cols) => {
                    let mut out = vec![0.0; cols.rows()];
                    for j in 0..cols.cols() {
                        let (idx, val) = cols.column(j);
                        for (i, v) in idx.iter().zip(val) {
                            out[*i as usize] += v * u[j];
                        }
                    }
                    out
                }
            };
        }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn pixels(&self) -> Vec<f64> {
        match &self.basis {
            None => self.coords.clone(),
            Some(b) => b.adjoint(&self.coords),
        }
    }

    /// Conditional energy of coordinate `j` given all others.
    pub fn conditional(&self, j: usize) -> Conditional {
        let (idx, val) = self.cols.column(j);
        let mut g = 0.0;
        for (i, v) in idx.iter().zip(val) {
            let i = *i as usize;
            g += v * self.precision[i] * self.resid[i];
        }
        let cj = self.coords[j];
        let mut a = self.a_data[j];
        let mut b = g - 2.0 * a * cj;
        let mut kinks = [(0.0, 0.0); 2];
        let mut n_kinks = 0;
        match &self.prior {
            PriorTerms::Gaussian { beta, l, l_sq, s } => {
                let ls = match l {
                    None => s[j],
                    Some(cols) => {
                        let (li, lv) = cols.column(j);
                        li.iter().zip(lv).map(|(i, v)| v * s[*i as usize]).sum()
                    }
                };
                a += 0.5 * beta * l_sq[j];
                b += beta * (ls - cj * l_sq[j]);
            }
            PriorTerms::L1 { scaled_weights } => {
                kinks[0] = (0.0, scaled_weights[j]);
                n_kinks = 1;
            }
            PriorTerms::Tv { lambda } => {
                if j > 0 {
                    kinks[n_kinks] = (self.coords[j - 1], *lambda);
                    n_kinks += 1;
                }
                if j + 1 < self.coords.len() {
                    kinks[n_kinks] = (self.coords[j + 1], *lambda);
                    n_kinks += 1;
                }
            }
        }
        Conditional { a, b, kinks, n_kinks }
    }

    /// Moves coordinate `j` to `t`.
    pub fn set(&mut self, j: usize, t: f64) {
        let delta = t - self.coords[j];
        if delta == 0.0 {
            return;
        }
        let (idx, val) = self.cols.column(j);
        for (i, v) in idx.iter().zip(val) {
            self.resid[*i as usize] += delta * v;
        }
        if let PriorTerms::Gaussian { l, s, .. } = &mut self.prior {
            match l {
                None => s[j] += delta,
                Some(cols) => {
                    let (li, lv) = cols.column(j);
                    for (i, v) in li.iter().zip(lv) {
                        s[*i as usize] += delta * v;
                    }
                }
            }
        }
        self.coords[j] = t;
    }

    /// Proposal scale of coordinate `j`: the conditional width of the smooth
    /// part, tempered by the prior slope where the data term is weak.
    pub fn natural_scale(&self, j: usize) -> f64 {
        let c = self.conditional(j);
        let slope: f64 = c.kinks().iter().map(|k| k.1).sum();
        1.0 / (2.0 * c.a + slope * slope).sqrt()
    }
}

/// `B^T` of an orthonormal operator.
struct Transposed(Operator);

impl LinearOperator for Transposed {
    fn in_dim(&self) -> usize {
        self.0.out_dim()
    }
    fn out_dim(&self) -> usize {
        self.0.in_dim()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.0.adjoint_into(x, y)
    }
    fn adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        self.0.apply_into(y, x)
    }
    fn name(&self) -> String {
        format!("{}^T", self.0.name())
    }
    fn is_orthonormal(&self) -> bool {
        self.0.is_orthonormal()
    }
}
