//! Classic Gaussian process regression with a constant mean and an ARD
//! Gaussian kernel, fitted by maximum marginal likelihood.
//!
//! [`ExactPosterior`] accepts any [`Kernel`], which is how the neural
//! surrogate's weight-space predictions are checked against the
//! function-space equations.

use crate::rng::rng_from;
use crate::stats::Standardizer;
use crate::{Error, Prediction, Predictor, Result};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng as _;
use std::f64::consts::PI;

pub trait Kernel {
    fn eval(&self, a: &[f64], b: &[f64]) -> f64;
}

impl<F: Fn(&[f64], &[f64]) -> f64> Kernel for F {
    fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        self(a, b)
    }
}

/// Amplitude `σ_f`, ARD lengthscales, observation noise `σ_n` and constant mean `μ_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelHyperparams {
    pub amplitude: f64,
    pub lengthscales: Vec<f64>,
    pub noise: f64,
    pub mean: f64,
}

impl KernelHyperparams {
    pub fn new(amplitude: f64, lengthscales: Vec<f64>, noise: f64, mean: f64) -> Result<Self> {
        let h = Self {
            amplitude,
            lengthscales,
            noise,
            mean,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.amplitude) {
            return Err(Error::InvalidHyperparameter(format!("amplitude {}", self.amplitude)));
        }
        if !pos(self.noise) {
            return Err(Error::InvalidHyperparameter(format!("noise {}", self.noise)));
        }
        if let Some(l) = self.lengthscales.iter().find(|&&l| !pos(l)) {
            return Err(Error::InvalidHyperparameter(format!("lengthscale {l}")));
        }
        if self.lengthscales.is_empty() {
            return Err(Error::InvalidHyperparameter("no lengthscales".into()));
        }
        if !self.mean.is_finite() {
            return Err(Error::InvalidHyperparameter(format!("mean {}", self.mean)));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    /// `[ln σ_f, ln l_1 … ln l_d, ln σ_n, μ_0]`
    pub fn to_log_params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.dim() + 3);
        p.push(self.amplitude.ln());
        p.extend(self.lengthscales.iter().map(|l| l.ln()));
        p.push(self.noise.ln());
        p.push(self.mean);
        p
    }

    pub fn from_log_params(p: &[f64]) -> Self {
        let d = p.len() - 3;
        Self {
            amplitude: p[0].exp(),
            lengthscales: p[1..=d].iter().map(|v| v.exp()).collect(),
            noise: p[d + 1].exp(),
            mean: p[d + 2],
        }
    }
}

impl Kernel for KernelHyperparams {
    fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for ((x1, x2), l) in a.iter().zip(b).zip(&self.lengthscales) {
            let r = (x1 - x2) / l;
            s += r * r;
        }
        self.amplitude * self.amplitude * (-0.5 * s).exp()
    }
}

/// `σ_f² · exp(−½ Σ (x1_i − x2_i)² / l_i²)`
pub fn kernel_eval(h: &KernelHyperparams, x1: &[f64], x2: &[f64]) -> Result<f64> {
    h.validate()?;
    for len in [x1.len(), x2.len()] {
        if len != h.dim() {
            return Err(Error::DimensionMismatch {
                expected: h.dim(),
                got: len,
            });
        }
    }
    Ok(h.eval(x1, x2))
}

pub fn gram<K: Kernel + ?Sized>(kernel: &K, xs: &[Vec<f64>]) -> DMatrix<f64> {
    let n = xs.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kernel.eval(&xs[i], &xs[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Cholesky with escalating diagonal jitter: none, then `1e-10·mean(diag)`
/// growing ×10 up to `1e-4·mean(diag)`.
pub fn cholesky_jittered(mut m: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Ok(c);
    }
    let n = m.nrows();
    let mean_diag = (0..n).map(|i| m[(i, i)]).sum::<f64>() / n.max(1) as f64;
    let scale = if mean_diag.is_finite() && mean_diag > 0.0 { mean_diag } else { 1.0 };
    let mut added = 0.0;
    let mut factor = 1e-10;
    while factor <= 1e-4 * (1.0 + 1e-9) {
        let jitter = factor * scale;
        for i in 0..n {
            m[(i, i)] += jitter - added;
        }
        added = jitter;
        if let Some(c) = Cholesky::new(m.clone()) {
            log::debug!("cholesky needed jitter {jitter:.3e}");
            return Ok(c);
        }
        factor *= 10.0;
    }
    Err(Error::Factorization(format!(
        "{n}x{n} covariance not positive definite after jitter {:.1e}",
        added
    )))
}

fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    let l = chol.l_dirty();
    2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
}

/// Function-space GP posterior for a fixed kernel, noise variance and constant mean.
#[derive(Debug, Clone)]
pub struct ExactPosterior<K> {
    kernel: K,
    inputs: Vec<Vec<f64>>,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    mean: f64,
    noise_var: f64,
    log_likelihood: f64,
}

impl<K: Kernel> ExactPosterior<K> {
    pub fn new(kernel: K, inputs: Vec<Vec<f64>>, y: &[f64], mean: f64, noise_var: f64) -> Result<Self> {
        if inputs.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.len(),
                got: y.len(),
            });
        }
        if inputs.is_empty() {
            return Err(Error::InvalidArgument("posterior needs at least one observation".into()));
        }
        let n = inputs.len();
        let mut k = gram(&kernel, &inputs);
        for i in 0..n {
            k[(i, i)] += noise_var;
        }
        let chol = cholesky_jittered(k)?;
        let r = DVector::from_iterator(n, y.iter().map(|v| v - mean));
        let alpha = chol.solve(&r);
        let log_likelihood = -0.5 * (r.dot(&alpha) + log_det(&chol) + n as f64 * (2.0 * PI).ln());
        Ok(Self {
            kernel,
            inputs,
            chol,
            alpha,
            mean,
            noise_var,
            log_likelihood,
        })
    }

    pub fn kernel(&self) -> &K {
        &self.kernel
    }

    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    /// `μ = μ_0 + k(x,X)α`, `σ² = σ_n² + k(x,x) − k(x,X)(K+σ_n²I)⁻¹k(X,x)`.
    pub fn predict(&self, x: &[f64]) -> Prediction {
        let kx = DVector::from_iterator(self.inputs.len(), self.inputs.iter().map(|xi| self.kernel.eval(x, xi)));
        let mean = self.mean + kx.dot(&self.alpha);
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&kx)
            .expect("cholesky factor has a positive diagonal");
        let mut variance = self.noise_var + self.kernel.eval(x, x) - v.norm_squared();
        if variance < 0.0 {
            log::warn!("posterior variance {variance:e} clamped to zero");
            variance = 0.0;
        }
        Prediction { mean, variance }
    }
}

/// Marginal log-likelihood under an arbitrary kernel.
pub fn log_likelihood_with<K: Kernel>(kernel: K, xs: &[Vec<f64>], y: &[f64], mean: f64, noise_var: f64) -> Result<f64> {
    Ok(ExactPosterior::new(kernel, xs.to_vec(), y, mean, noise_var)?.log_likelihood())
}

/// `−½((y−μ_0)ᵀK_θ⁻¹(y−μ_0) + ln|K_θ| + N ln 2π)` with `K_θ = K + σ_n²I`.
pub fn gp_log_likelihood(h: &KernelHyperparams, xs: &[Vec<f64>], y: &[f64]) -> Result<f64> {
    h.validate()?;
    check_inputs(h.dim(), xs)?;
    log_likelihood_with(h.clone(), xs, y, h.mean, h.noise * h.noise)
}

fn check_inputs(dim: usize, xs: &[Vec<f64>]) -> Result<()> {
    if let Some(x) = xs.iter().find(|x| x.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: x.len(),
        });
    }
    Ok(())
}

/// Log-likelihood and its gradient with respect to [`KernelHyperparams::to_log_params`].
pub fn gp_log_likelihood_grad(h: &KernelHyperparams, xs: &[Vec<f64>], y: &[f64]) -> Result<(f64, Vec<f64>)> {
    h.validate()?;
    check_inputs(h.dim(), xs)?;
    let n = xs.len();
    let d = h.dim();
    let kf = gram(h, xs);
    let mut k = kf.clone();
    let noise_var = h.noise * h.noise;
    for i in 0..n {
        k[(i, i)] += noise_var;
    }
    let chol = cholesky_jittered(k)?;
    let r = DVector::from_iterator(n, y.iter().map(|v| v - h.mean));
    let alpha = chol.solve(&r);
    let ll = -0.5 * (r.dot(&alpha) + log_det(&chol) + n as f64 * (2.0 * PI).ln());

    // W = ααᵀ − K⁻¹, dL/dθ = ½ tr(W ∂K/∂θ)
    let kinv = chol.inverse();
    let mut grad = vec![0.0; d + 3];
    let mut trace_w = 0.0;
    for i in 0..n {
        for j in 0..n {
            let w = alpha[i] * alpha[j] - kinv[(i, j)];
            let kij = kf[(i, j)];
            grad[0] += w * kij;
            if i != j {
                for (l, len) in h.lengthscales.iter().enumerate() {
                    let diff = (xs[i][l] - xs[j][l]) / len;
                    grad[1 + l] += 0.5 * w * kij * diff * diff;
                }
            } else {
                trace_w += w;
            }
        }
    }
    grad[d + 1] = noise_var * trace_w;
    grad[d + 2] = alpha.sum();
    Ok((ll, grad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpFitConfig {
    pub restarts: usize,
    pub iterations: usize,
    pub learning_rate: f64,
}

impl Default for GpFitConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            iterations: 200,
            learning_rate: 0.05,
        }
    }
}

const LOG_AMPLITUDE_RANGE: (f64, f64) = (-6.9, 4.6);
const LOG_LENGTHSCALE_RANGE: (f64, f64) = (-6.9, 6.9);
const LOG_NOISE_RANGE: (f64, f64) = (-11.5, 2.3);

fn clamp_log_params(p: &mut [f64]) {
    let d = p.len() - 3;
    p[0] = p[0].clamp(LOG_AMPLITUDE_RANGE.0, LOG_AMPLITUDE_RANGE.1);
    for v in &mut p[1..=d] {
        *v = v.clamp(LOG_LENGTHSCALE_RANGE.0, LOG_LENGTHSCALE_RANGE.1);
    }
    p[d + 1] = p[d + 1].clamp(LOG_NOISE_RANGE.0, LOG_NOISE_RANGE.1);
}

/// Multistart initializations used by [`gp_fit_with`], in standardized target units.
/// The first start is a fixed default; the rest are random.
pub fn initial_hyperparams(dim: usize, cfg: &GpFitConfig, seed: u64) -> Vec<KernelHyperparams> {
    let mut rng = rng_from(seed);
    let mut inits = vec![KernelHyperparams {
        amplitude: 1.0,
        lengthscales: vec![0.5; dim],
        noise: 0.1,
        mean: 0.0,
    }];
    for _ in 1..cfg.restarts.max(1) {
        let amplitude = rng.random_range(0.3f64.ln()..3.0f64.ln()).exp();
        let lengthscales = (0..dim).map(|_| rng.random_range(0.05f64.ln()..2.0f64.ln()).exp()).collect();
        let noise = rng.random_range(1e-3f64.ln()..0.3f64.ln()).exp();
        inits.push(KernelHyperparams {
            amplitude,
            lengthscales,
            noise,
            mean: 0.0,
        });
    }
    inits
}

/// A fitted baseline GP. Hyperparameters live in standardized target units;
/// predictions are returned in the original units.
#[derive(Debug, Clone)]
pub struct GpModel {
    hyperparams: KernelHyperparams,
    posterior: ExactPosterior<KernelHyperparams>,
    target: Standardizer,
}

impl GpModel {
    pub fn hyperparams(&self) -> &KernelHyperparams {
        &self.hyperparams
    }

    pub fn target(&self) -> Standardizer {
        self.target
    }

    /// Log-likelihood of the standardized training targets at the fitted hyperparameters.
    pub fn log_likelihood(&self) -> f64 {
        self.posterior.log_likelihood()
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        if x.len() != self.hyperparams.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.hyperparams.dim(),
                got: x.len(),
            });
        }
        let p = self.posterior.predict(x);
        Ok(Prediction {
            mean: self.target.inverse_mean(p.mean),
            variance: self.target.inverse_variance(p.variance),
        })
    }
}

impl Predictor for GpModel {
    fn input_dim(&self) -> usize {
        self.hyperparams.dim()
    }

    fn predict(&self, x: &[f64]) -> Result<Prediction> {
        GpModel::predict(self, x)
    }
}

pub fn gp_fit(xs: &[Vec<f64>], y: &[f64], seed: u64) -> Result<GpModel> {
    gp_fit_with(xs, y, &GpFitConfig::default(), seed)
}

/// Multistart Adam ascent on the log-likelihood in log-parameter space.
/// Returns the best iterate seen across all starts.
pub fn gp_fit_with(xs: &[Vec<f64>], y: &[f64], cfg: &GpFitConfig, seed: u64) -> Result<GpModel> {
    if xs.len() < 2 {
        return Err(Error::InvalidArgument("GP fitting needs at least two observations".into()));
    }
    if xs.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            got: y.len(),
        });
    }
    let dim = xs[0].len();
    check_inputs(dim, xs)?;
    let target = Standardizer::fit(y);
    let ys = target.forward_all(y);

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut last_err = None;
    for init in initial_hyperparams(dim, cfg, seed) {
        let mut p = init.to_log_params();
        let mut adam = crate::optim::Adam::new(p.len(), cfg.learning_rate);
        for _ in 0..=cfg.iterations {
            let h = KernelHyperparams::from_log_params(&p);
            let (ll, grad) = match gp_log_likelihood_grad(&h, xs, &ys) {
                Ok(v) => v,
                Err(e) => {
                    last_err = Some(e);
                    break;
                }
            };
            if !ll.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                break;
            }
            if best.as_ref().is_none_or(|(b, _)| ll > *b) {
                best = Some((ll, p.clone()));
            }
            adam.ascend(&mut p, &grad);
            clamp_log_params(&mut p);
        }
    }
    let (_, p) = best.ok_or_else(|| {
        last_err.unwrap_or_else(|| Error::Factorization("no start produced a finite likelihood".into()))
    })?;
    let hyperparams = KernelHyperparams::from_log_params(&p);
    let posterior = ExactPosterior::new(
        hyperparams.clone(),
        xs.to_vec(),
        &ys,
        hyperparams.mean,
        hyperparams.noise * hyperparams.noise,
    )?;
    Ok(GpModel {
        hyperparams,
        posterior,
        target,
    })
}
