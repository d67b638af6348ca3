use super::network::{batch_matrix, Architecture, ForwardCache, NetworkWeights};
use crate::rng::{rng_from, Rng};
use crate::stats::Standardizer;
use crate::{Error, Prediction, Predictor, Result};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng as _;
use std::f64::consts::{LN_10, PI};

const LOG_SIGMA_N_RANGE: (f64, f64) = (-3.0 * LN_10, LN_10); // [1e-3, 10]
const LOG_SIGMA_P_RANGE: (f64, f64) = (-3.0 * LN_10, 3.0 * LN_10); // [1e-3, 1e3]

/// Hyperparameter vector `θ = [σ_n, σ_p, η]`, noise and prior scales stored as logs.
#[derive(Debug, Clone, PartialEq)]
pub struct Theta {
    pub log_sigma_n: f64,
    pub log_sigma_p: f64,
    pub weights: NetworkWeights,
}

impl Theta {
    pub fn new(sigma_n: f64, sigma_p: f64, weights: NetworkWeights) -> Result<Self> {
        for (name, v) in [("sigma_n", sigma_n), ("sigma_p", sigma_p)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidHyperparameter(format!("{name} = {v}")));
            }
        }
        Ok(Self {
            log_sigma_n: sigma_n.ln(),
            log_sigma_p: sigma_p.ln(),
            weights,
        })
    }

    /// Random initialization: `ln σ_n ~ U(ln 1e-2, ln 1e-1)`, `ln σ_p ~ U(ln 0.5, ln 2)`,
    /// fan-in uniform network weights.
    pub fn random(arch: Architecture, rng: &mut Rng) -> Result<Self> {
        let log_sigma_n = rng.random_range(1e-2f64.ln()..1e-1f64.ln());
        let log_sigma_p = rng.random_range(0.5f64.ln()..2.0f64.ln());
        Ok(Self {
            log_sigma_n,
            log_sigma_p,
            weights: NetworkWeights::random(arch, rng)?,
        })
    }

    pub fn sigma_n(&self) -> f64 {
        self.log_sigma_n.exp()
    }

    pub fn sigma_p(&self) -> f64 {
        self.log_sigma_p.exp()
    }

    pub fn feature_dim(&self) -> usize {
        self.weights.architecture().features
    }

    pub fn architecture(&self) -> Architecture {
        self.weights.architecture()
    }

    /// Ridge term `Mσ_n²/σ_p²` of `A`.
    pub fn ridge(&self) -> f64 {
        self.feature_dim() as f64 * (2.0 * (self.log_sigma_n - self.log_sigma_p)).exp()
    }

    /// `[ln σ_n, ln σ_p, η…]`, the layout of [`nn_likelihood_grad`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = vec![self.log_sigma_n, self.log_sigma_p];
        v.extend(self.weights.to_flat());
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() < 2 {
            return Err(Error::DimensionMismatch {
                expected: 2 + self.architecture().param_count(),
                got: flat.len(),
            });
        }
        self.weights.set_flat(&flat[2..])?;
        self.log_sigma_n = flat[0];
        self.log_sigma_p = flat[1];
        Ok(())
    }

    fn is_finite(&self) -> bool {
        self.log_sigma_n.is_finite() && self.log_sigma_p.is_finite() && self.weights.is_finite()
    }
}

/// Weight-space quantities for one `(θ, X, y)`.
struct WeightSpace {
    cache: ForwardCache,
    chol: Cholesky<f64, Dyn>,
    /// `A⁻¹Φy`
    weight_mean: DVector<f64>,
    log_likelihood: f64,
}

fn check_data(theta: &Theta, xs: &[Vec<f64>], y: &[f64]) -> Result<DMatrix<f64>> {
    if xs.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            got: y.len(),
        });
    }
    batch_matrix(theta.architecture().input_dim, xs)
}

fn weight_space(theta: &Theta, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<WeightSpace> {
    let cache = theta.weights.forward_batch(x);
    let phi = &cache.phi;
    let m = phi.nrows();
    let n = phi.ncols();
    let sigma_n2 = (2.0 * theta.log_sigma_n).exp();
    let ridge = theta.ridge();

    let mut a = phi * phi.transpose();
    for i in 0..m {
        a[(i, i)] += ridge;
    }
    let chol = Cholesky::new(a).ok_or_else(|| {
        Error::Factorization(format!("A ({m}x{m}) not positive definite, ridge {ridge:e}"))
    })?;
    let b = phi * y;
    let weight_mean = chol.solve(&b);
    let quad = y.norm_squared() - b.dot(&weight_mean);
    let l = chol.l_dirty();
    let log_det_a = 2.0 * (0..m).map(|i| l[(i, i)].ln()).sum::<f64>();
    let log_likelihood = -quad / (2.0 * sigma_n2) - 0.5 * log_det_a + 0.5 * m as f64 * ridge.ln()
        - 0.5 * n as f64 * (2.0 * PI * sigma_n2).ln();
    Ok(WeightSpace {
        cache,
        chol,
        weight_mean,
        log_likelihood,
    })
}

fn likelihood_and_grad(theta: &Theta, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(f64, Vec<f64>)> {
    let ws = weight_space(theta, x, y)?;
    let phi = &ws.cache.phi;
    let (m, n) = phi.shape();
    let beta = (-2.0 * theta.log_sigma_n).exp();
    let ridge = theta.ridge();
    let mean = &ws.weight_mean;

    // ∂L/∂Φ = β·m(y − Φᵀm)ᵀ − A⁻¹Φ
    let resid = y - phi.tr_mul(mean);
    let mut d_phi = ws.chol.solve(phi);
    d_phi.ger(beta, mean, &resid, -1.0);

    let trace_inv = ws.chol.inverse().trace();
    let mtm = mean.norm_squared();
    let quad = y.norm_squared() - (phi * y).dot(mean);
    let d_log_sigma_n = beta * quad - beta * ridge * mtm - ridge * trace_inv + m as f64 - n as f64;
    let d_log_sigma_p = beta * ridge * mtm + ridge * trace_inv - m as f64;

    let d_out = d_phi.rows(0, m - 1).into_owned();
    let mut grad = Vec::with_capacity(2 + theta.architecture().param_count());
    grad.push(d_log_sigma_n);
    grad.push(d_log_sigma_p);
    grad.extend(theta.weights.backward(x, &ws.cache, &d_out));
    Ok((ws.log_likelihood, grad))
}

/// Weight-space marginal log-likelihood
/// `−(yᵀy − yᵀΦᵀA⁻¹Φy)/(2σ_n²) − ½ln|A| + (M/2)ln(Mσ_n²/σ_p²) − (N/2)ln(2πσ_n²)`.
pub fn nn_log_likelihood(theta: &Theta, xs: &[Vec<f64>], y: &[f64]) -> Result<f64> {
    let x = check_data(theta, xs, y)?;
    Ok(weight_space(theta, &x, &DVector::from_column_slice(y))?.log_likelihood)
}

/// Log-likelihood and its gradient over `[ln σ_n, ln σ_p, η]` (see [`Theta::to_flat`]).
pub fn nn_likelihood_grad(theta: &Theta, xs: &[Vec<f64>], y: &[f64]) -> Result<(f64, Vec<f64>)> {
    let x = check_data(theta, xs, y)?;
    likelihood_and_grad(theta, &x, &DVector::from_column_slice(y))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NnFitConfig {
    pub hidden1: usize,
    pub hidden2: usize,
    /// `M`, including the appended constant feature.
    pub features: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    /// Learning rate at the last step as a fraction of the initial one
    /// (exponential schedule); 1 keeps it constant.
    pub final_lr_fraction: f64,
}

impl Default for NnFitConfig {
    fn default() -> Self {
        Self {
            hidden1: 32,
            hidden2: 32,
            features: 16,
            iterations: 2000,
            learning_rate: 1e-2,
            final_lr_fraction: 1.0,
        }
    }
}

impl NnFitConfig {
    pub fn architecture(&self, input_dim: usize) -> Architecture {
        Architecture {
            input_dim,
            hidden1: self.hidden1,
            hidden2: self.hidden2,
            features: self.features,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingSummary {
    pub initial_log_likelihood: f64,
    pub final_log_likelihood: f64,
    pub steps: usize,
}

#[derive(Debug, Clone)]
struct Posterior {
    /// Lower Cholesky factor of `A`.
    chol_l: DMatrix<f64>,
    weight_mean: DVector<f64>,
    n_train: usize,
}

/// A weight-space GP surrogate. `θ` and the cached posterior live in
/// standardized target units; [`NeuralSurrogate::predict`] maps back.
#[derive(Debug, Clone)]
pub struct NeuralSurrogate {
    theta: Theta,
    target: Standardizer,
    posterior: Option<Posterior>,
    training: Option<TrainingSummary>,
}

impl NeuralSurrogate {
    /// A surrogate with hyperparameters but no cached posterior.
    pub fn unfitted(theta: Theta) -> Self {
        Self {
            theta,
            target: Standardizer::IDENTITY,
            posterior: None,
            training: None,
        }
    }

    /// Conditions `θ` on raw (unstandardized) data. An empty data set gives the prior.
    pub fn condition(theta: Theta, xs: &[Vec<f64>], y: &[f64]) -> Result<Self> {
        Self::condition_standardized(theta, xs, y, Standardizer::IDENTITY)
    }

    fn condition_standardized(theta: Theta, xs: &[Vec<f64>], y: &[f64], target: Standardizer) -> Result<Self> {
        let x = check_data(&theta, xs, y)?;
        let ws = weight_space(&theta, &x, &DVector::from_column_slice(y))?;
        let posterior = Posterior {
            chol_l: ws.chol.l(),
            weight_mean: ws.weight_mean,
            n_train: xs.len(),
        };
        Ok(Self {
            theta,
            target,
            posterior: Some(posterior),
            training: None,
        })
    }

    pub fn theta(&self) -> &Theta {
        &self.theta
    }

    pub fn target(&self) -> Standardizer {
        self.target
    }

    pub fn training(&self) -> Option<TrainingSummary> {
        self.training
    }

    pub fn n_train(&self) -> Option<usize> {
        self.posterior.as_ref().map(|p| p.n_train)
    }

    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>> {
        super::forward_features(&self.theta.weights, x)
    }

    /// `k(x₁,x₂) = (σ_p²/M)·φ(x₁)ᵀφ(x₂)`
    pub fn implied_kernel(&self, x1: &[f64], x2: &[f64]) -> Result<f64> {
        let f1 = self.features(x1)?;
        let f2 = self.features(x2)?;
        let scale = self.theta.sigma_p().powi(2) / self.theta.feature_dim() as f64;
        Ok(scale * f1.iter().zip(&f2).map(|(a, b)| a * b).sum::<f64>())
    }

    /// Observation-noise variance in output units.
    pub fn noise_variance(&self) -> f64 {
        self.target.inverse_variance(self.theta.sigma_n().powi(2))
    }

    fn predict_from_features(&self, post: &Posterior, phi: &[f64]) -> Prediction {
        let sigma_n2 = (2.0 * self.theta.log_sigma_n).exp();
        let m = phi.len();
        let mean = phi.iter().zip(post.weight_mean.iter()).map(|(a, b)| a * b).sum::<f64>();
        // v = L⁻¹φ, φᵀA⁻¹φ = ‖v‖²
        let l = &post.chol_l;
        let mut v = [0.0f64; 64];
        let mut heap;
        let v: &mut [f64] = if m <= 64 {
            &mut v[..m]
        } else {
            heap = vec![0.0; m];
            &mut heap
        };
        let mut quad = 0.0;
        for i in 0..m {
            let mut s = phi[i];
            for j in 0..i {
                s -= l[(i, j)] * v[j];
            }
            v[i] = s / l[(i, i)];
            quad += v[i] * v[i];
        }
        let variance = sigma_n2 + sigma_n2 * quad;
        Prediction {
            mean: self.target.inverse_mean(mean),
            variance: self.target.inverse_variance(variance),
        }
    }

    /// `μ = φᵀA⁻¹Φy`, `σ² = σ_n² + σ_n²·φᵀA⁻¹φ`, in output units.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let post = self.posterior.as_ref().ok_or(Error::Unfitted)?;
        let phi = self.features(x)?;
        Ok(self.predict_from_features(post, &phi))
    }

    pub fn predict_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<Prediction>> {
        let post = self.posterior.as_ref().ok_or(Error::Unfitted)?;
        let x = batch_matrix(self.theta.architecture().input_dim, xs)?;
        let cache = self.theta.weights.forward_batch(&x);
        Ok(cache
            .phi
            .column_iter()
            .map(|c| self.predict_from_features(post, c.as_slice()))
            .collect())
    }
}

impl Predictor for NeuralSurrogate {
    fn input_dim(&self) -> usize {
        self.theta.architecture().input_dim
    }

    fn predict(&self, x: &[f64]) -> Result<Prediction> {
        NeuralSurrogate::predict(self, x)
    }

    fn predict_many(&self, xs: &[Vec<f64>]) -> Result<Vec<Prediction>> {
        self.predict_batch(xs)
    }
}

fn clamp_scales(p: &mut [f64]) {
    p[0] = p[0].clamp(LOG_SIGMA_N_RANGE.0, LOG_SIGMA_N_RANGE.1);
    p[1] = p[1].clamp(LOG_SIGMA_P_RANGE.0, LOG_SIGMA_P_RANGE.1);
}

/// Randomly initializes `θ` from `seed` and trains it; see [`nn_fit_from`].
pub fn nn_fit(xs: &[Vec<f64>], y: &[f64], cfg: &NnFitConfig, seed: u64) -> Result<NeuralSurrogate> {
    let dim = xs
        .first()
        .map(|x| x.len())
        .ok_or_else(|| Error::InvalidArgument("training needs at least one observation".into()))?;
    let theta = Theta::random(cfg.architecture(dim), &mut rng_from(seed))?;
    nn_fit_from(xs, y, cfg, theta)
}

/// Full-batch Adam ascent on the marginal likelihood of the standardized
/// targets, starting at `init`. The best iterate is kept and the posterior
/// caches are built once at the end.
pub fn nn_fit_from(xs: &[Vec<f64>], y: &[f64], cfg: &NnFitConfig, init: Theta) -> Result<NeuralSurrogate> {
    if xs.is_empty() {
        return Err(Error::InvalidArgument("training needs at least one observation".into()));
    }
    let target = Standardizer::fit(y);
    let ys = target.forward_all(y);
    let x = check_data(&init, xs, &ys)?;
    let yv = DVector::from_vec(ys.clone());

    let mut theta = init;
    let mut params = theta.to_flat();
    clamp_scales(&mut params);
    theta.set_flat(&params)?;
    let mut adam = crate::optim::Adam::new(params.len(), cfg.learning_rate);
    let decay = if cfg.iterations > 1 && cfg.final_lr_fraction > 0.0 {
        cfg.final_lr_fraction.ln() / (cfg.iterations - 1) as f64
    } else {
        0.0
    };

    let mut initial = None;
    let mut best = (f64::NEG_INFINITY, params.clone());
    for step in 0..=cfg.iterations {
        let (ll, grad) = likelihood_and_grad(&theta, &x, &yv).map_err(|e| Error::TrainingDiverged {
            step,
            detail: e.to_string(),
        })?;
        if !ll.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::TrainingDiverged {
                step,
                detail: format!(
                    "log-likelihood {ll}, sigma_n {:.3e}, sigma_p {:.3e}",
                    theta.sigma_n(),
                    theta.sigma_p()
                ),
            });
        }
        initial.get_or_insert(ll);
        if ll > best.0 {
            best = (ll, params.clone());
        }
        if step == cfg.iterations {
            break;
        }
        adam.learning_rate = cfg.learning_rate * (decay * step as f64).exp();
        adam.ascend(&mut params, &grad);
        clamp_scales(&mut params);
        theta.set_flat(&params)?;
    }
    theta.set_flat(&best.1)?;
    if !theta.is_finite() {
        return Err(Error::NonFinite("trained hyperparameters".into()));
    }
    let mut surrogate = NeuralSurrogate::condition_standardized(theta, xs, &ys, target)?;
    surrogate.training = Some(TrainingSummary {
        initial_log_likelihood: initial.unwrap_or(f64::NAN),
        final_log_likelihood: best.0,
        steps: cfg.iterations,
    });
    Ok(surrogate)
}
