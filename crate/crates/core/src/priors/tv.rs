//! Proximal map of the 1D anisotropic total variation.

/// `argmin_x ½|x - v|² + t Σ|x_{i+1} - x_i|`, solved on the dual
/// `min_{|z|∞ ≤ t} ½|v - D^T z|²` by accelerated projected gradient.
pub fn tv_prox(v: &[f64], t: f64) -> Vec<f64> {
    let n = v.len();
    if n < 2 || t == 0.0 {
        return v.to_vec();
    }
    let m = n - 1;
    let mut z = vec![0.0; m];
    let mut y = z.clone();
    let mut z_prev = z.clone();
    let mut x = v.to_vec();
    let mut x_old = x.clone();
    let mut momentum = 1.0_f64;
    let max_iters = 200_000usize.max(50 * n * n).min(5_000_000);
    let scale = 1.0 + v.iter().fold(0.0_f64, |a, b| a.max(b.abs()));

    let primal = |z: &[f64], x: &mut [f64]| {
        // x = v - D^T z, with (D^T z)_i = z_{i-1} - z_i.
        for i in 0..n {
            let left = if i > 0 { z[i - 1] } else { 0.0 };
            let right = if i < m { z[i] } else { 0.0 };
            x[i] = v[i] - (left - right);
        }
    };

    for it in 0..max_iters {
        primal(&y, &mut x);
        z_prev.copy_from_slice(&z);
        // gradient of the dual objective is -D x
        for k in 0..m {
            z[k] = (y[k] + 0.25 * (x[k + 1] - x[k])).clamp(-t, t);
        }
        let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let beta = (momentum - 1.0) / next;
        momentum = next;
        for k in 0..m {
            y[k] = z[k] + beta * (z[k] - z_prev[k]);
        }
        if it % 50 == 49 {
            primal(&z, &mut x);
            let change = x.iter().zip(&x_old).fold(0.0_f64, |a, (p, q)| a.max((p - q).abs()));
            x_old.copy_from_slice(&x);
            // adaptive restart keeps the accelerated scheme monotone in practice
            momentum = 1.0;
            y.copy_from_slice(&z);
            if change <= 1e-15 * scale {
                break;
            }
        }
    }
    primal(&z, &mut x);
    x
}
