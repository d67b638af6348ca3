//! Expected improvement, probability of feasibility, weighted EI, and a
//! pool-plus-pattern-search maximizer over the unit cube.
//!
//! Constraints follow the `g(x) < 0` convention and the objective is minimized.

use crate::design_space::{lhs_unit, DesignSpace};
use crate::rng::rng_from;
use crate::stats::{ei_kernel, log_ei_kernel, norm_cdf, norm_log_cdf};
use crate::{Error, Predictor, Result};
use std::cmp::Ordering;

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{name} = {v}")))
    }
}

fn check_inputs(mu: f64, sigma: f64) -> Result<()> {
    check_finite("mu", mu)?;
    check_finite("sigma", sigma)?;
    if sigma < 0.0 {
        return Err(Error::InvalidArgument(format!("sigma = {sigma} is negative")));
    }
    Ok(())
}

/// `EI = σ(λΦ(λ) + φ(λ))` with `λ = (τ − μ)/σ`; `max(τ − μ, 0)` when `σ = 0`.
pub fn expected_improvement(mu: f64, sigma: f64, tau: f64) -> Result<f64> {
    check_inputs(mu, sigma)?;
    check_finite("tau", tau)?;
    if sigma == 0.0 {
        return Ok((tau - mu).max(0.0));
    }
    Ok(sigma * ei_kernel((tau - mu) / sigma))
}

/// `ln EI`, finite far into the region where `EI` underflows.
pub fn log_expected_improvement(mu: f64, sigma: f64, tau: f64) -> Result<f64> {
    check_inputs(mu, sigma)?;
    check_finite("tau", tau)?;
    if sigma == 0.0 {
        return Ok((tau - mu).max(0.0).ln());
    }
    Ok(sigma.ln() + log_ei_kernel((tau - mu) / sigma))
}

/// `PF = Φ(−μ/σ)`, the probability that a Gaussian constraint value is negative.
pub fn prob_feasible(mu: f64, sigma: f64) -> Result<f64> {
    check_inputs(mu, sigma)?;
    if sigma == 0.0 {
        return Ok(if mu < 0.0 { 1.0 } else { 0.0 });
    }
    Ok(norm_cdf(-mu / sigma))
}

pub fn log_prob_feasible(mu: f64, sigma: f64) -> Result<f64> {
    check_inputs(mu, sigma)?;
    if sigma == 0.0 {
        return Ok(if mu < 0.0 { 0.0 } else { f64::NEG_INFINITY });
    }
    Ok(norm_log_cdf(-mu / sigma))
}

/// Models and incumbent needed to score candidates.
pub struct AcquisitionContext<'a> {
    /// Best feasible objective observed so far; `None` until one exists.
    pub tau: Option<f64>,
    pub objective: &'a dyn Predictor,
    pub constraints: Vec<&'a dyn Predictor>,
}

/// Score of one candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquisitionValue {
    pub value: f64,
    pub log_value: f64,
    /// `Σ ln PF_i`
    pub log_feasibility: f64,
    pub objective_sigma: f64,
}

const LOG_SPACE_THRESHOLD: f64 = 1e-100;

fn combine(ei: Option<(f64, f64)>, pfs: &[(f64, f64)], objective_sigma: f64) -> AcquisitionValue {
    let log_feasibility: f64 = pfs.iter().map(|(_, l)| l).sum();
    let log_value = log_feasibility + ei.map_or(0.0, |(_, l)| l);
    let tiny = pfs.iter().any(|(v, _)| *v < LOG_SPACE_THRESHOLD) || ei.is_some_and(|(v, _)| v < LOG_SPACE_THRESHOLD);
    let value = if tiny {
        log_value.exp()
    } else {
        pfs.iter().fold(ei.map_or(1.0, |(v, _)| v), |acc, (v, _)| acc * v)
    };
    AcquisitionValue {
        value,
        log_value,
        log_feasibility,
        objective_sigma,
    }
}

impl AcquisitionContext<'_> {
    pub fn feasible_seen(&self) -> bool {
        self.tau.is_some()
    }

    fn score(&self, obj: crate::Prediction, cons: &[crate::Prediction]) -> Result<AcquisitionValue> {
        let sigma = obj.std_dev();
        let ei = match self.tau {
            Some(tau) => Some((
                expected_improvement(obj.mean, sigma, tau)?,
                log_expected_improvement(obj.mean, sigma, tau)?,
            )),
            None => None,
        };
        let pfs = cons
            .iter()
            .map(|p| Ok((prob_feasible(p.mean, p.std_dev())?, log_prob_feasible(p.mean, p.std_dev())?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(combine(ei, &pfs, sigma))
    }

    /// `wEI(x) = EI(x)·Π PF_i(x)`, or `Π PF_i(x)` before any feasible observation.
    pub fn evaluate(&self, x: &[f64]) -> Result<AcquisitionValue> {
        let obj = self.objective.predict(x)?;
        let cons = self
            .constraints
            .iter()
            .map(|c| c.predict(x))
            .collect::<Result<Vec<_>>>()?;
        self.score(obj, &cons)
    }

    pub fn evaluate_many(&self, xs: &[Vec<f64>]) -> Result<Vec<AcquisitionValue>> {
        let obj = self.objective.predict_many(xs)?;
        let cons = self
            .constraints
            .iter()
            .map(|c| c.predict_many(xs))
            .collect::<Result<Vec<_>>>()?;
        let mut buf = Vec::with_capacity(cons.len());
        (0..xs.len())
            .map(|i| {
                buf.clear();
                buf.extend(cons.iter().map(|c| c[i]));
                self.score(obj[i], &buf)
            })
            .collect()
    }

    pub fn weighted_ei(&self, x: &[f64]) -> Result<f64> {
        Ok(self.evaluate(x)?.value)
    }
}

pub fn weighted_ei(ctx: &AcquisitionContext<'_>, x: &[f64]) -> Result<f64> {
    ctx.weighted_ei(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaximizerConfig {
    /// Pool size; `None` means `2000·d`.
    pub pool_size: Option<usize>,
    pub refine_top: usize,
    pub refine_rounds: usize,
    pub initial_step: f64,
}

impl Default for MaximizerConfig {
    fn default() -> Self {
        Self {
            pool_size: None,
            refine_top: 10,
            refine_rounds: 20,
            initial_step: 0.1,
        }
    }
}

impl MaximizerConfig {
    pub fn pool_for(&self, dim: usize) -> usize {
        self.pool_size.unwrap_or(2000 * dim).max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    /// Normalized design in `[0,1]^d`.
    pub x: Vec<f64>,
    pub score: AcquisitionValue,
    /// Every pool candidate scored zero; `x` maximizes feasibility instead.
    pub fallback: bool,
}

/// Descending by log value, ties to the lower index.
fn better(a: (f64, usize), b: (f64, usize)) -> bool {
    match a.0.partial_cmp(&b.0) {
        Some(Ordering::Greater) => true,
        Some(Ordering::Less) => false,
        _ => a.1 < b.1,
    }
}

fn pattern_search(
    ctx: &AcquisitionContext<'_>,
    start: &[f64],
    start_score: AcquisitionValue,
    cfg: &MaximizerConfig,
) -> Result<(Vec<f64>, AcquisitionValue)> {
    let mut x = start.to_vec();
    let mut cur = start_score;
    let mut step = cfg.initial_step;
    for _ in 0..cfg.refine_rounds {
        let mut improved = false;
        for i in 0..x.len() {
            for dir in [1.0, -1.0] {
                let moved = (x[i] + dir * step).clamp(0.0, 1.0);
                if moved == x[i] {
                    continue;
                }
                let old = x[i];
                x[i] = moved;
                let s = ctx.evaluate(&x)?;
                if s.log_value > cur.log_value {
                    cur = s;
                    improved = true;
                    break;
                }
                x[i] = old;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok((x, cur))
}

/// Scores a Latin hypercube pool, refines the best candidates by bounded
/// coordinate pattern search, and returns the best point found.
pub fn maximize_acquisition(
    ctx: &AcquisitionContext<'_>,
    space: &DesignSpace,
    cfg: &MaximizerConfig,
    seed: u64,
) -> Result<Proposal> {
    let dim = space.dim();
    let pool = lhs_unit(dim, cfg.pool_for(dim), &mut rng_from(seed))?;
    let scores = ctx.evaluate_many(&pool)?;

    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&a, &b| {
        if better((scores[a].log_value, a), (scores[b].log_value, b)) {
            Ordering::Less
        } else if a == b {
            Ordering::Equal
        } else {
            Ordering::Greater
        }
    });

    if scores[order[0]].log_value == f64::NEG_INFINITY {
        let mut best = 0;
        for i in 1..pool.len() {
            let (a, b) = (&scores[i], &scores[best]);
            let key = |s: &AcquisitionValue| (s.log_feasibility, s.objective_sigma);
            if key(a) > key(b) {
                best = i;
            }
        }
        return Ok(Proposal {
            x: pool[best].clone(),
            score: scores[best],
            fallback: true,
        });
    }

    let mut best_x = pool[order[0]].clone();
    let mut best_score = scores[order[0]];
    for &i in order.iter().take(cfg.refine_top) {
        if scores[i].log_value == f64::NEG_INFINITY {
            break;
        }
        let (x, s) = pattern_search(ctx, &pool[i], scores[i], cfg)?;
        if s.log_value > best_score.log_value {
            best_x = x;
            best_score = s;
        }
    }
    Ok(Proposal {
        x: best_x,
        score: best_score,
        fallback: false,
    })
}
