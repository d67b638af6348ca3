//! Constrained Bayesian optimization for expensive black-box problems such as
//! analog device sizing.
//!
//! The surrogate for every metric is a Gaussian process whose kernel is the
//! inner product of features produced by a small fully-connected network
//! (Bayesian linear regression in the network's feature space). Several
//! independently initialized surrogates are fused by moment matching and the
//! next design is chosen by maximizing weighted expected improvement.
//!
//! Module map:
//!
//! - [`design_space`]: bounded variables, unit-cube normalization, Latin hypercube sampling.
//! - [`gp`]: classic ARD Gaussian-kernel GP, used as baseline and as the function-space oracle.
//! - [`neural`]: feature network, weight-space GP, marginal likelihood and its gradient, training.
//! - [`ensemble`]: K-member ensembles fused by moment matching.
//! - [`acquisition`]: EI, probability of feasibility, weighted EI and its maximizer.
//! - [`evaluator`]: black-box evaluation (external process protocol and builtin problems).
//! - [`bo`]: the optimization loop, dataset bookkeeping and random-search comparator.

pub mod acquisition;
pub mod bo;
pub mod design_space;
pub mod ensemble;
mod error;
pub mod evaluator;
pub mod gp;
pub mod neural;
pub mod optim;
pub mod problem;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};

/// Gaussian predictive distribution of a scalar metric at one design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

impl Prediction {
    pub fn std_dev(&self) -> f64 {
        self.variance.max(0.0).sqrt()
    }
}

/// Anything that produces a Gaussian prediction at a normalized design.
pub trait Predictor: Send + Sync {
    fn input_dim(&self) -> usize;

    fn predict(&self, x: &[f64]) -> Result<Prediction>;

    fn predict_many(&self, xs: &[Vec<f64>]) -> Result<Vec<Prediction>> {
        xs.iter().map(|x| self.predict(x)).collect()
    }
}
