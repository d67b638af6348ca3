//! The optimization campaign: initial Latin hypercube sweep, then one
//! proposal per iteration from per-metric surrogate ensembles and weighted
//! expected improvement.

use crate::acquisition::{maximize_acquisition, AcquisitionContext, MaximizerConfig};
use crate::design_space::lhs_unit;
use crate::ensemble::{fit_ensemble, refit_ensemble, EnsembleModel};
use crate::evaluator::{EvalFailure, Evaluator};
use crate::gp::{gp_fit_with, GpFitConfig, GpModel};
use crate::neural::{NnFitConfig, Theta};
use crate::problem::{Ingested, Problem};
use crate::rng::{derive, rng_from, TAG_ACQUISITION, TAG_FALLBACK_DESIGN, TAG_INITIAL_DESIGN, TAG_RANDOM_SEARCH, TAG_SURROGATE};
use crate::{Error, Predictor, Result};
use rand::Rng as _;
use std::fmt;
use std::time::SystemTime;

/// Observations in normalized coordinates. Rows are only ever appended.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    n_constraints: usize,
    xs: Vec<Vec<f64>>,
    objective: Vec<f64>,
    margins: Vec<Vec<f64>>,
    failed: Vec<bool>,
}

impl Dataset {
    pub fn new(dim: usize, n_constraints: usize) -> Self {
        Self {
            dim,
            n_constraints,
            xs: Vec::new(),
            objective: Vec::new(),
            margins: Vec::new(),
            failed: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_constraints(&self) -> usize {
        self.n_constraints
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    fn check_x(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(())
    }

    /// Appends a successful evaluation (objective in minimization form,
    /// constraint margins with `g < 0` feasible).
    pub fn push(&mut self, x: Vec<f64>, obs: &Ingested) -> Result<()> {
        self.check_x(&x)?;
        if obs.margins.len() != self.n_constraints {
            return Err(Error::DimensionMismatch { expected: self.n_constraints, got: obs.margins.len() });
        }
        if !obs.objective.is_finite() || obs.margins.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("observation".into()));
        }
        self.xs.push(x);
        self.objective.push(obs.objective);
        self.margins.push(obs.margins.clone());
        self.failed.push(false);
        Ok(())
    }

    /// Appends a failed evaluation. It counts as a row but never trains a
    /// model and never becomes the incumbent.
    pub fn push_failure(&mut self, x: Vec<f64>) -> Result<()> {
        self.check_x(&x)?;
        self.xs.push(x);
        self.objective.push(f64::NAN);
        self.margins.push(vec![f64::NAN; self.n_constraints]);
        self.failed.push(true);
        Ok(())
    }

    pub fn is_failed(&self, i: usize) -> bool {
        self.failed[i]
    }

    pub fn is_feasible(&self, i: usize) -> bool {
        !self.failed[i] && self.margins[i].iter().all(|&g| g < 0.0)
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.xs[i]
    }

    pub fn objective(&self, i: usize) -> Option<f64> {
        (!self.failed[i]).then_some(self.objective[i])
    }

    /// Inputs, objective values and per-constraint margins of the non-failed rows.
    pub fn training_data(&self) -> (Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>) {
        let rows: Vec<usize> = (0..self.len()).filter(|&i| !self.failed[i]).collect();
        let xs = rows.iter().map(|&i| self.xs[i].clone()).collect();
        let obj = rows.iter().map(|&i| self.objective[i]).collect();
        let cons = (0..self.n_constraints)
            .map(|j| rows.iter().map(|&i| self.margins[i][j]).collect())
            .collect();
        (xs, obj, cons)
    }
}

/// Minimum objective over feasible, non-failed rows.
pub fn current_tau(d: &Dataset) -> Option<f64> {
    (0..d.len())
        .filter(|&i| d.is_feasible(i))
        .map(|i| d.objective[i])
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))))
}

pub fn record_failure(d: &mut Dataset, x: Vec<f64>) -> Result<()> {
    d.push_failure(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurrogateKind {
    Neural,
    Gp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Bayesian,
    /// Same initial design, then uniform random proposals.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub kind: SurrogateKind,
    pub network: NnFitConfig,
    pub ensemble_size: usize,
    /// Continue each member from its previous `θ` instead of a fresh random start.
    pub warm_start: bool,
    /// Training steps of a warm-started refit.
    pub warm_start_iterations: usize,
    pub gp: GpFitConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: SurrogateKind::Neural,
            network: NnFitConfig::default(),
            ensemble_size: 5,
            warm_start: false,
            warm_start_iterations: 200,
            gp: GpFitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignConfig {
    pub n_init: usize,
    pub max_evals: usize,
    pub seed: u64,
    pub strategy: Strategy,
    pub model: ModelConfig,
    pub acquisition: MaximizerConfig,
    /// Abort after this many failed evaluations in a row.
    pub max_consecutive_failures: usize,
}

impl CampaignConfig {
    pub fn new(n_init: usize, max_evals: usize, seed: u64) -> Self {
        Self {
            n_init,
            max_evals,
            seed,
            strategy: Strategy::Bayesian,
            model: ModelConfig::default(),
            acquisition: MaximizerConfig::default(),
            max_consecutive_failures: 20,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_init < 2 {
            return bad(format!("n_init = {} must be at least 2", self.n_init));
        }
        if self.max_evals < self.n_init {
            return bad(format!("max_evals = {} is below n_init = {}", self.max_evals, self.n_init));
        }
        if self.model.ensemble_size == 0 {
            return bad("ensemble_size must be at least 1".into());
        }
        let net = &self.model.network;
        if net.hidden1 == 0 || net.hidden2 == 0 || net.features == 0 {
            return bad("network layer sizes must be positive".into());
        }
        if !(net.learning_rate > 0.0 && net.learning_rate.is_finite()) {
            return bad(format!("learning_rate = {} must be positive", net.learning_rate));
        }
        if self.acquisition.refine_top == 0 && self.acquisition.refine_rounds > 0 {
            return bad("refine_top must be positive when refine_rounds is".into());
        }
        if self.max_consecutive_failures == 0 {
            return bad("max_consecutive_failures must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Initial,
    Bayesian,
    /// No usable model this iteration; the point continues a Latin hypercube.
    Fallback,
    Random,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Initial => "init",
            Phase::Bayesian => "bo",
            Phase::Fallback => "fallback",
            Phase::Random => "random",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    /// 1-based evaluation counter.
    pub iteration: usize,
    pub phase: Phase,
    /// Physical units.
    pub design: Vec<f64>,
    /// Raw metric values in evaluator order, or why there are none.
    pub outcome: std::result::Result<Vec<f64>, EvalFailure>,
    /// Objective in minimization form.
    pub objective: Option<f64>,
    pub feasible: bool,
    /// Acquisition value that selected this design.
    pub proposal_wei: Option<f64>,
    pub timestamp: SystemTime,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    BudgetExhausted,
    EvaluatorFatal(String),
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Termination::BudgetExhausted => f.write_str("budget exhausted"),
            Termination::EvaluatorFatal(why) => write!(f, "evaluator fatal: {why}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    pub entries: Vec<LogEntry>,
    /// Best feasible objective (minimization form) after each evaluation.
    pub best_trace: Vec<Option<f64>>,
    pub termination: Termination,
    pub dataset: Dataset,
}

impl CampaignResult {
    /// Index into `entries` of the best feasible evaluation.
    pub fn best_index(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, e) in self.entries.iter().enumerate() {
            if let (true, Some(v)) = (e.feasible, e.objective) {
                if best.is_none_or(|(_, b)| v < b) {
                    best = Some((i, v));
                }
            }
        }
        best.map(|(i, _)| i)
    }

    pub fn best_objective(&self) -> Option<f64> {
        self.best_trace.last().copied().flatten()
    }

    /// Evaluations used until the first feasible one, if any.
    pub fn evals_to_feasible(&self) -> Option<usize> {
        self.entries.iter().position(|e| e.feasible).map(|i| i + 1)
    }
}

enum MetricModel {
    Ensemble(EnsembleModel),
    Gp(Box<GpModel>),
}

impl MetricModel {
    fn predictor(&self) -> &dyn Predictor {
        match self {
            MetricModel::Ensemble(e) => e,
            MetricModel::Gp(g) => g.as_ref(),
        }
    }
}

struct Surrogates {
    warm: Vec<Option<Vec<Theta>>>,
}

impl Surrogates {
    fn fit(&mut self, cfg: &ModelConfig, xs: &[Vec<f64>], columns: &[&[f64]], seed: u64) -> Result<Vec<MetricModel>> {
        let mut out = Vec::with_capacity(columns.len());
        for (j, y) in columns.iter().enumerate() {
            let s = derive(seed, TAG_SURROGATE, j as u64);
            let model = match cfg.kind {
                SurrogateKind::Gp => MetricModel::Gp(Box::new(gp_fit_with(xs, y, &cfg.gp, s)?)),
                SurrogateKind::Neural => {
                    let e = match self.warm[j].take() {
                        Some(starts) if cfg.warm_start => {
                            let net = NnFitConfig { iterations: cfg.warm_start_iterations, ..cfg.network.clone() };
                            refit_ensemble(xs, y, &net, starts)?
                        }
                        _ => fit_ensemble(xs, y, cfg.ensemble_size, &cfg.network, s)?,
                    };
                    if cfg.warm_start {
                        self.warm[j] = Some(e.thetas());
                    }
                    MetricModel::Ensemble(e)
                }
            };
            out.push(model);
        }
        Ok(out)
    }
}

struct Campaign<'a> {
    problem: &'a Problem,
    evaluator: &'a dyn Evaluator,
    cfg: &'a CampaignConfig,
    data: Dataset,
    entries: Vec<LogEntry>,
    best_trace: Vec<Option<f64>>,
    consecutive_failures: usize,
}

impl Campaign<'_> {
    /// Evaluates one normalized design and records it. Returns the fatal
    /// reason when the campaign cannot continue.
    fn evaluate(&mut self, u: Vec<f64>, phase: Phase, proposal_wei: Option<f64>) -> Result<Option<String>> {
        let design = self.problem.space.denormalize(&u)?.0;
        let outcome = self.evaluator.evaluate(&design);
        let mut objective = None;
        let mut feasible = false;
        let mut fatal = None;
        match &outcome {
            Ok(raw) => {
                let obs = self.problem.ingest(raw)?;
                objective = Some(obs.objective);
                feasible = obs.feasible();
                self.data.push(u, &obs)?;
                self.consecutive_failures = 0;
            }
            Err(why) => {
                log::warn!("evaluation {} failed: {why}", self.entries.len() + 1);
                record_failure(&mut self.data, u)?;
                self.consecutive_failures += 1;
                if why.is_fatal() {
                    fatal = Some(why.to_string());
                } else if self.consecutive_failures >= self.cfg.max_consecutive_failures {
                    fatal = Some(format!("{} consecutive failed evaluations, last: {why}", self.consecutive_failures));
                }
            }
        }
        self.entries.push(LogEntry {
            iteration: self.entries.len() + 1,
            phase,
            design,
            outcome,
            objective,
            feasible,
            proposal_wei,
            timestamp: SystemTime::now(),
        });
        self.best_trace.push(current_tau(&self.data));
        Ok(fatal)
    }
}

/// Runs a full campaign: `n_init` Latin hypercube points, then one proposal
/// per iteration until `max_evals` evaluations have been made.
pub fn run_campaign(problem: &Problem, evaluator: &dyn Evaluator, cfg: &CampaignConfig) -> Result<CampaignResult> {
    cfg.validate()?;
    if evaluator.metric_names() != problem.metrics.as_slice() {
        return Err(Error::InvalidArgument(format!(
            "evaluator reports metrics {:?} but the problem declares {:?}",
            evaluator.metric_names(),
            problem.metrics
        )));
    }
    let dim = problem.space.dim();
    let mut c = Campaign {
        problem,
        evaluator,
        cfg,
        data: Dataset::new(dim, problem.constraints.len()),
        entries: Vec::with_capacity(cfg.max_evals),
        best_trace: Vec::with_capacity(cfg.max_evals),
        consecutive_failures: 0,
    };
    let finish = |c: Campaign<'_>, termination| CampaignResult {
        entries: c.entries,
        best_trace: c.best_trace,
        termination,
        dataset: c.data,
    };

    let initial = lhs_unit(dim, cfg.n_init, &mut rng_from(derive(cfg.seed, TAG_INITIAL_DESIGN, 0)))?;
    for u in initial {
        if let Some(why) = c.evaluate(u, Phase::Initial, None)? {
            return Ok(finish(c, Termination::EvaluatorFatal(why)));
        }
    }

    let remaining = cfg.max_evals - cfg.n_init;
    let mut fallback = if remaining > 0 {
        lhs_unit(dim, remaining, &mut rng_from(derive(cfg.seed, TAG_FALLBACK_DESIGN, 0)))?.into_iter()
    } else {
        Vec::new().into_iter()
    };
    let mut random = rng_from(derive(cfg.seed, TAG_RANDOM_SEARCH, 0));
    let mut surrogates = Surrogates { warm: vec![None; 1 + problem.constraints.len()] };

    for t in 1..=remaining {
        let (u, phase, wei) = match cfg.strategy {
            Strategy::Random => ((0..dim).map(|_| random.random::<f64>()).collect(), Phase::Random, None),
            Strategy::Bayesian => match propose(&c.data, problem, cfg, &mut surrogates, t as u64) {
                Ok(Some((u, wei))) => (u, Phase::Bayesian, Some(wei)),
                Ok(None) => (fallback.next().expect("one fallback point per iteration"), Phase::Fallback, None),
                Err(e) => {
                    log::warn!("iteration {t}: no proposal from the surrogates ({e}); using a fallback design");
                    (fallback.next().expect("one fallback point per iteration"), Phase::Fallback, None)
                }
            },
        };
        if let Some(why) = c.evaluate(u, phase, wei)? {
            return Ok(finish(c, Termination::EvaluatorFatal(why)));
        }
    }
    Ok(finish(c, Termination::BudgetExhausted))
}

/// Fits one model per metric and maximizes weighted EI. `None` when fewer
/// than two successful rows exist.
fn propose(
    data: &Dataset,
    problem: &Problem,
    cfg: &CampaignConfig,
    surrogates: &mut Surrogates,
    t: u64,
) -> Result<Option<(Vec<f64>, f64)>> {
    let (xs, obj, cons) = data.training_data();
    if xs.len() < 2 {
        return Ok(None);
    }
    let mut columns: Vec<&[f64]> = vec![&obj];
    columns.extend(cons.iter().map(|c| c.as_slice()));
    let models = surrogates.fit(&cfg.model, &xs, &columns, derive(cfg.seed, TAG_SURROGATE, t))?;
    let ctx = AcquisitionContext {
        tau: current_tau(data),
        objective: models[0].predictor(),
        constraints: models[1..].iter().map(|m| m.predictor()).collect(),
    };
    let proposal = maximize_acquisition(&ctx, &problem.space, &cfg.acquisition, derive(cfg.seed, TAG_ACQUISITION, t))?;
    Ok(Some((proposal.x, proposal.score.value)))
}
