//! Separable scalar Gibbs energies and their closed-form Bregman distances.
//!
//! The closed forms are the textbook expressions; tests compare each against
//! the generic definition `J(u) - J(v) - J'(v) (u - v)`.

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScalarEnergy {
    /// `u^2 / 2`
    HalfSquare,
    /// `|u|^p` with `1 < p < inf`
    Power(f64),
    /// `|u|`, with `sign(0) = 0` as the selected subgradient
    Abs,
    /// `u log u - u` on `u >= 0`
    Entropy,
}

impl ScalarEnergy {
    pub fn energy(&self, u: f64) -> f64 {
        match *self {
            ScalarEnergy::HalfSquare => 0.5 * u * u,
            ScalarEnergy::Power(p) => u.abs().powf(p),
            ScalarEnergy::Abs => u.abs(),
            ScalarEnergy::Entropy => {
                if u == 0.0 {
                    0.0
                } else if u > 0.0 {
                    u * u.ln() - u
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    pub fn derivative(&self, v: f64) -> f64 {
        match *self {
            ScalarEnergy::HalfSquare => v,
            ScalarEnergy::Power(p) => p * crate::vecops::sign0(v) * v.abs().powf(p - 1.0),
            ScalarEnergy::Abs => crate::vecops::sign0(v),
            ScalarEnergy::Entropy => v.ln(),
        }
    }

    /// `D(u, v)` from the closed-form table.
    pub fn bregman(&self, u: f64, v: f64) -> f64 {
        use crate::vecops::sign0;
        match *self {
            ScalarEnergy::HalfSquare => 0.5 * (u - v) * (u - v),
            ScalarEnergy::Power(p) => {
                u.abs().powf(p) - p * u * sign0(v) * v.abs().powf(p - 1.0) + (p - 1.0) * v.abs().powf(p)
            }
            ScalarEnergy::Abs => (sign0(u) - sign0(v)) * u,
            ScalarEnergy::Entropy => {
                let head = if u == 0.0 { 0.0 } else { u * (u / v).ln() };
                head + v - u
            }
        }
    }

    /// Sum of [`ScalarEnergy::bregman`] over components.
    pub fn bregman_sum(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter().zip(v).map(|(a, b)| self.bregman(*a, *b)).sum()
    }
}
