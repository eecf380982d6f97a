//! Conjugate gradients for symmetric positive (semi)definite systems given
//! only through their action.

use crate::vecops::{axpy, dot, norm2};

#[derive(Clone, Copy, Debug)]
pub struct CgOptions {
    /// Stop when `|r| <= rel_tol * |b|`.
    pub rel_tol: f64,
    pub max_iters: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions {
            rel_tol: 1e-12,
            max_iters: 1000,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CgOutcome {
    pub iterations: usize,
    pub rel_residual: f64,
    pub converged: bool,
    /// A search direction with (numerically) zero curvature was met.
    pub near_singular: bool,
}

/// Solves `A x = b` starting from the contents of `x`. `precond`, when given,
/// applies an SPD approximation of `A^{-1}`.
pub fn conjugate_gradient(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    precond: Option<&dyn Fn(&[f64], &mut [f64])>,
    b: &[f64],
    x: &mut [f64],
    opts: CgOptions,
) -> CgOutcome {
    let n = b.len();
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        x.fill(0.0);
        return CgOutcome {
            iterations: 0,
            rel_residual: 0.0,
            converged: true,
            near_singular: false,
        };
    }
    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut z = vec![0.0; n];
    let precondition = |r: &[f64], z: &mut [f64]| match precond {
        Some(m) => m(r, z),
        None => z.copy_from_slice(r),
    };
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut rel = norm2(&r) / b_norm;
    let mut near_singular = false;
    let mut max_ratio = 0.0_f64;
    let mut it = 0;
    while it < opts.max_iters && rel > opts.rel_tol {
        apply(&p, &mut ap);
        let curvature = dot(&p, &ap);
        let ratio = curvature / dot(&p, &p);
        max_ratio = max_ratio.max(ratio);
        if !(curvature > 1e-300) || ratio <= 1e-14 * max_ratio {
            near_singular = true;
            break;
        }
        let alpha = rz / curvature;
        axpy(alpha, &p, x);
        axpy(-alpha, &ap, &mut r);
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
        rel = norm2(&r) / b_norm;
        it += 1;
    }
    CgOutcome {
        iterations: it,
        rel_residual: rel,
        converged: rel <= opts.rel_tol,
        near_singular,
    }
}

/// Solves a symmetric tridiagonal system (Thomas algorithm); `off` holds the
/// off-diagonal, length `n - 1`.
pub fn solve_tridiagonal(diag: &[f64], off: &[f64], rhs: &[f64], out: &mut [f64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = if n > 1 { off[0] / diag[0] } else { 0.0 };
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - off[i - 1] * c[i - 1];
        if i < n - 1 {
            c[i] = off[i] / denom;
        }
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / denom;
    }
    out[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        out[i] = d[i] - c[i] * out[i + 1];
    }
}
