//! Scalar numerics shared across modules: standard normal functions (with
//! tail-safe logarithms), compensated summation and target standardization.

use libm::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z - LN_SQRT_2PI).exp()
}

pub fn norm_log_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// Continued fraction `x + k/(x + (k+1)/(x + ...))`, evaluated backward.
/// Converges quickly for `x` beyond ~5.
fn tail_fraction(x: f64, k: usize) -> f64 {
    const DEPTH: usize = 120;
    let mut t = x;
    for j in (k..=DEPTH).rev() {
        t = x + j as f64 / t;
    }
    t
}

/// `ln Φ(z)`, accurate deep into the lower tail where `Φ` underflows.
pub fn norm_log_cdf(z: f64) -> f64 {
    if z > -30.0 {
        norm_cdf(z).ln()
    } else {
        // Φ(z) = φ(z) · m(-z), Mills ratio m(x) = 1 / (x + 1/(x + 2/(x + ...)))
        let x = -z;
        norm_log_pdf(x) - tail_fraction(x, 1).ln()
    }
}

/// `h(λ) = λ·Φ(λ) + φ(λ)`, the standardized expected improvement.
pub fn ei_kernel(lambda: f64) -> f64 {
    (lambda * norm_cdf(lambda) + norm_pdf(lambda)).max(0.0)
}

/// `ln h(λ)` without underflow for very negative `λ`.
pub fn log_ei_kernel(lambda: f64) -> f64 {
    if lambda > -25.0 {
        ei_kernel(lambda).ln()
    } else {
        // h(-x) = φ(x) · m(x) / T₂(x) with T₂ = x + 2/(x + 3/(x + ...))
        let x = -lambda;
        let t2 = tail_fraction(x, 2);
        let m = 1.0 / (x + 1.0 / t2);
        norm_log_pdf(x) + m.ln() - t2.ln()
    }
}

pub fn inv_sqrt_2pi() -> f64 {
    1.0 / (2.0 * PI).sqrt()
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.compensation += (self.sum - t) + v;
        } else {
            self.compensation += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = CompensatedSum::default();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Affine map between a metric's original scale and zero-mean/unit-variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Standardizer {
    pub mean: f64,
    pub scale: f64,
}

impl Standardizer {
    pub const IDENTITY: Standardizer = Standardizer {
        mean: 0.0,
        scale: 1.0,
    };

    /// Population mean and standard deviation; a degenerate spread maps to
    /// unit scale so constant targets standardize to zero.
    pub fn fit(y: &[f64]) -> Self {
        if y.is_empty() {
            return Self::IDENTITY;
        }
        let n = y.len() as f64;
        let mean = compensated_sum(y.iter().copied()) / n;
        let var = compensated_sum(y.iter().map(|v| (v - mean) * (v - mean))) / n;
        let sd = var.sqrt();
        let scale = if sd.is_finite() && sd > 1e-12 * mean.abs().max(1.0) {
            sd
        } else {
            1.0
        };
        Self { mean, scale }
    }

    pub fn forward(&self, v: f64) -> f64 {
        (v - self.mean) / self.scale
    }

    pub fn forward_all(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|&v| self.forward(v)).collect()
    }

    pub fn inverse_mean(&self, v: f64) -> f64 {
        self.mean + self.scale * v
    }

    pub fn inverse_variance(&self, v: f64) -> f64 {
        self.scale * self.scale * v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cdf_anchors() {
        assert_relative_eq!(norm_cdf(0.0), 0.5, epsilon = 1e-15);
        assert_relative_eq!(norm_cdf(1.0), 0.841_344_746_068_542_9, epsilon = 1e-14);
        assert_relative_eq!(norm_cdf(-1.644_853_626_951_472_2), 0.05, epsilon = 1e-12);
    }

    #[test]
    fn log_cdf_is_continuous_across_branch() {
        let direct = norm_cdf(-29.999).ln();
        let below = norm_log_cdf(-30.001);
        assert!((direct - below).abs() < 0.1);
        // both branches agree where both are valid
        let x: f64 = 32.0;
        let cf = norm_log_pdf(x) - tail_fraction(x, 1).ln();
        assert_relative_eq!(cf, norm_cdf(-x).ln(), max_relative = 1e-12);
    }

    #[test]
    fn log_ei_kernel_branches_agree() {
        for &x in &[20.0_f64, 24.0, 26.0, 30.0] {
            let direct = (-x * norm_cdf(-x) + norm_pdf(x)).ln();
            let t2 = tail_fraction(x, 2);
            let m = 1.0 / (x + 1.0 / t2);
            let cf = norm_log_pdf(x) + m.ln() - t2.ln();
            assert_relative_eq!(direct, cf, max_relative = 1e-9);
        }
        assert!(log_ei_kernel(-60.0).is_finite());
        assert!(log_ei_kernel(-60.0) < log_ei_kernel(-59.0));
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let vals = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(vals), 2.0);
    }

    #[test]
    fn constant_target_standardizes_to_zero() {
        let s = Standardizer::fit(&[3.5, 3.5, 3.5]);
        assert_eq!(s.scale, 1.0);
        assert_eq!(s.forward(3.5), 0.0);
    }
}
