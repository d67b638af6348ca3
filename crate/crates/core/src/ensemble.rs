//! K independently initialized neural surrogates fused by moment matching.

use crate::neural::{nn_fit, nn_fit_from, NeuralSurrogate, NnFitConfig, Theta};
use crate::stats::CompensatedSum;
use crate::{Error, Prediction, Predictor, Result};
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct EnsembleModel {
    members: Vec<NeuralSurrogate>,
}

/// Seed of member `k`: `seed ⊕ k`.
pub fn member_seed(seed: u64, k: usize) -> u64 {
    seed ^ k as u64
}

/// Trains `k` members on identical data; member `i` uses [`member_seed`].
/// Members train concurrently; the result does not depend on scheduling.
pub fn fit_ensemble(xs: &[Vec<f64>], y: &[f64], k: usize, cfg: &NnFitConfig, seed: u64) -> Result<EnsembleModel> {
    if k == 0 {
        return Err(Error::InvalidArgument("ensemble size must be at least 1".into()));
    }
    let members = (0..k)
        .into_par_iter()
        .map(|i| nn_fit(xs, y, cfg, member_seed(seed, i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleModel { members })
}

/// Like [`fit_ensemble`] but each member continues from a given `θ`.
pub fn refit_ensemble(xs: &[Vec<f64>], y: &[f64], cfg: &NnFitConfig, starts: Vec<Theta>) -> Result<EnsembleModel> {
    if starts.is_empty() {
        return Err(Error::InvalidArgument("ensemble size must be at least 1".into()));
    }
    let members = starts
        .into_par_iter()
        .map(|theta| nn_fit_from(xs, y, cfg, theta))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleModel { members })
}

/// Moment matching of a uniform Gaussian mixture:
/// `μ = mean(μ_k)`, `σ² = mean(μ_k² + σ_k²) − μ²`.
///
/// Evaluated as `mean(σ_k²) + mean((μ_k − μ)²)`, which is the same quantity
/// without cancellation; sums run in member order with compensation.
pub fn fuse(preds: &[Prediction]) -> Result<Prediction> {
    let first = preds.first().ok_or(Error::Unfitted)?;
    let k = preds.len() as f64;
    let mut dm = CompensatedSum::default();
    let mut dv = CompensatedSum::default();
    for p in preds {
        dm.add(p.mean - first.mean);
        dv.add(p.variance - first.variance);
    }
    let mean = first.mean + dm.value() / k;
    let mut spread = CompensatedSum::default();
    for p in preds {
        let d = p.mean - mean;
        spread.add(d * d);
    }
    let avg_var = first.variance + dv.value() / k;
    let variance = (avg_var + spread.value() / k).max(0.0);
    Ok(Prediction { mean, variance })
}

impl EnsembleModel {
    pub fn from_members(members: Vec<NeuralSurrogate>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidArgument("ensemble size must be at least 1".into()));
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[NeuralSurrogate] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn thetas(&self) -> Vec<Theta> {
        self.members.iter().map(|m| m.theta().clone()).collect()
    }

    pub fn member_predictions(&self, x: &[f64]) -> Result<Vec<Prediction>> {
        self.members.iter().map(|m| m.predict(x)).collect()
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        fuse(&self.member_predictions(x)?)
    }
}

pub fn ensemble_predict(e: &EnsembleModel, x: &[f64]) -> Result<Prediction> {
    e.predict(x)
}

impl Predictor for EnsembleModel {
    fn input_dim(&self) -> usize {
        self.members[0].input_dim()
    }

    fn predict(&self, x: &[f64]) -> Result<Prediction> {
        EnsembleModel::predict(self, x)
    }

    fn predict_many(&self, xs: &[Vec<f64>]) -> Result<Vec<Prediction>> {
        let per_member = self
            .members
            .iter()
            .map(|m| m.predict_batch(xs))
            .collect::<Result<Vec<_>>>()?;
        let mut buf = Vec::with_capacity(self.members.len());
        (0..xs.len())
            .map(|i| {
                buf.clear();
                buf.extend(per_member.iter().map(|p| p[i]));
                fuse(&buf)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(mean: f64, variance: f64) -> Prediction {
        Prediction { mean, variance }
    }

    #[test]
    fn agreement_is_exact() {
        let q = p(0.1, 0.3);
        assert_eq!(fuse(&[q; 5]).unwrap(), q);
        let q = p(-1234.567, 1e-9);
        assert_eq!(fuse(&[q; 7]).unwrap(), q);
    }

    #[test]
    fn two_member_hand_value() {
        let f = fuse(&[p(0.0, 0.0), p(2.0, 0.0)]).unwrap();
        assert_eq!(f, p(1.0, 1.0));
    }

    #[test]
    fn variance_decomposes_into_average_plus_spread() {
        let preds = [p(1.0, 0.5), p(-0.5, 0.2), p(3.0, 1.5)];
        let f = fuse(&preds).unwrap();
        let mu = (1.0 - 0.5 + 3.0) / 3.0;
        let second = preds.iter().map(|q| q.mean * q.mean + q.variance).sum::<f64>() / 3.0;
        assert!((f.mean - mu).abs() < 1e-15);
        assert!((f.variance - (second - mu * mu)).abs() < 1e-13);
        let min_var = preds.iter().map(|q| q.variance).fold(f64::INFINITY, f64::min);
        assert!(f.variance >= min_var - 1e-12);
    }

    #[test]
    fn empty_is_unfitted() {
        assert!(matches!(fuse(&[]), Err(Error::Unfitted)));
        assert!(fit_ensemble(&[vec![0.0]], &[1.0], 0, &NnFitConfig::default(), 0).is_err());
    }
}
