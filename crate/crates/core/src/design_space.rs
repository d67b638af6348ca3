//! Bounded continuous design domains.
//!
//! Surrogates and acquisition work on the unit cube `[0,1]^d`; physical units
//! only appear at the evaluator boundary.

use crate::rng::{rng_from, Rng};
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng as _;
use std::collections::HashSet;

const UNIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpace {
    names: Vec<String>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

/// A design in physical units.
#[derive(Debug, Clone, PartialEq)]
pub struct Design(pub Vec<f64>);

impl Design {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl DesignSpace {
    pub fn new(names: Vec<String>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::InvalidSpace("at least one variable is required".into()));
        }
        if names.len() != lower.len() || names.len() != upper.len() {
            return Err(Error::InvalidSpace(format!(
                "{} names, {} lower bounds, {} upper bounds",
                names.len(),
                lower.len(),
                upper.len()
            )));
        }
        let mut seen = HashSet::new();
        for (i, name) in names.iter().enumerate() {
            if name.trim().is_empty() {
                return Err(Error::InvalidSpace(format!("variable {i} has an empty name")));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidSpace(format!("duplicate variable name '{name}'")));
            }
            let (lo, hi) = (lower[i], upper[i]);
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidSpace(format!("variable '{name}' has a non-finite bound")));
            }
            if lo >= hi {
                return Err(Error::InvalidSpace(format!(
                    "variable '{name}' needs lower < upper (got {lo} >= {hi})"
                )));
            }
        }
        Ok(Self { names, lower, upper })
    }

    /// Convenience constructor from `(name, lower, upper)` triples.
    pub fn from_bounds<S: Into<String>>(vars: impl IntoIterator<Item = (S, f64, f64)>) -> Result<Self> {
        let mut names = Vec::new();
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        for (n, lo, hi) in vars {
            names.push(n.into());
            lower.push(lo);
            upper.push(hi);
        }
        Self::new(names, lower, upper)
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: len,
            });
        }
        Ok(())
    }

    /// Validates that a physical vector lies inside the box.
    pub fn design(&self, values: Vec<f64>) -> Result<Design> {
        self.check_dim(values.len())?;
        for (i, &v) in values.iter().enumerate() {
            if !(self.lower[i]..=self.upper[i]).contains(&v) {
                return Err(Error::OutOfBounds {
                    index: i,
                    value: v,
                    lower: self.lower[i],
                    upper: self.upper[i],
                });
            }
        }
        Ok(Design(values))
    }

    pub fn normalize(&self, x: &Design) -> Result<Vec<f64>> {
        self.check_dim(x.0.len())?;
        x.0.iter()
            .enumerate()
            .map(|(i, &v)| {
                let (lo, hi) = (self.lower[i], self.upper[i]);
                if !(lo..=hi).contains(&v) {
                    return Err(Error::OutOfBounds {
                        index: i,
                        value: v,
                        lower: lo,
                        upper: hi,
                    });
                }
                Ok(((v - lo) / (hi - lo)).clamp(0.0, 1.0))
            })
            .collect()
    }

    pub fn denormalize(&self, u: &[f64]) -> Result<Design> {
        self.check_dim(u.len())?;
        let values = u
            .iter()
            .enumerate()
            .map(|(i, &ui)| {
                if !(-UNIT_TOLERANCE..=1.0 + UNIT_TOLERANCE).contains(&ui) {
                    return Err(Error::OutOfBounds {
                        index: i,
                        value: ui,
                        lower: 0.0,
                        upper: 1.0,
                    });
                }
                let (lo, hi) = (self.lower[i], self.upper[i]);
                let ui = ui.clamp(0.0, 1.0);
                // exact at both ends
                Ok(if ui == 1.0 { hi } else { lo + ui * (hi - lo) })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Design(values))
    }

    /// Latin hypercube sample of `n` designs, a pure function of `(self, n, seed)`.
    pub fn lhs_sample(&self, n: usize, seed: u64) -> Result<Vec<Design>> {
        let unit = lhs_unit(self.dim(), n, &mut rng_from(seed))?;
        unit.iter().map(|u| self.denormalize(u)).collect()
    }
}

/// Latin hypercube in `[0,1)^d`: each column places exactly one point per
/// stratum `[k/n, (k+1)/n)`.
pub fn lhs_unit(dim: usize, n: usize, rng: &mut Rng) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::InvalidArgument("LHS sample size must be at least 1".into()));
    }
    let mut points = vec![vec![0.0; dim]; n];
    let nf = n as f64;
    let mut strata: Vec<usize> = (0..n).collect();
    #[allow(clippy::needless_range_loop)]
    for j in 0..dim {
        strata.shuffle(rng);
        for (i, &k) in strata.iter().enumerate() {
            let r: f64 = rng.random();
            let mut u = (k as f64 + r) / nf;
            // rounding can push the value into the next stratum
            while (u * nf).floor() as usize > k {
                u = u.next_down();
            }
            points[i][j] = u;
        }
    }
    Ok(points)
}
