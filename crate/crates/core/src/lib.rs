//! Bayesian inversion for linear problems with Gaussian noise and
//! log-concave Gibbs priors: MAP estimation by Split Bregman, conditional-mean
//! estimation by MCMC, and Monte Carlo checks of Bregman-distance Bayes costs.

pub mod bayescost;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod io;
pub mod krylov;
pub mod map_solver;
pub mod noise;
pub mod operators;
pub mod posterior;
pub mod priors;
pub mod sampler;
pub mod vecops;

pub use error::{Error, Result};
pub use grid::{Grid, Signal};
pub use noise::GaussianNoiseModel;
pub use operators::{LinearOperator, Operator};
pub use posterior::Posterior;
pub use priors::{BregmanEval, Prior, PriorKind};
