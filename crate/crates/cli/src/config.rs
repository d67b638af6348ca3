//! Campaign configuration file: TOML with a fixed schema, unknown keys
//! rejected, and `key=value` overrides applied before validation.

use nnbo_core::acquisition::MaximizerConfig;
use nnbo_core::bo::{CampaignConfig, ModelConfig, Strategy, SurrogateKind};
use nnbo_core::design_space::DesignSpace;
use nnbo_core::evaluator::{builtin, Builtin, Evaluator, ExternalEvaluator};
use nnbo_core::neural::NnFitConfig;
use nnbo_core::problem::{Constraint, ConstraintOp, Direction, Objective, Problem};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Duration;
use toml::{Table, Value};

/// A configuration problem, always naming the offending key.
#[derive(Debug, thiserror::Error)]
#[error("{key}: {message}")]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self { key: key.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_strategy")]
    pub strategy: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<SpaceSection>,
    pub evaluator: EvaluatorSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<ObjectiveSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraints: Option<Vec<ConstraintSection>>,
    pub budget: BudgetSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub acquisition: AcquisitionSection,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("nnbo-out")
}

fn default_strategy() -> String {
    "bayesian".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSection {
    pub variables: Vec<VariableSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableSection {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluatorSection {
    /// `builtin` or `external`
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<Vec<String>>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_passthrough")]
    pub env_passthrough: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub working_dir: Option<PathBuf>,
}

fn default_timeout() -> f64 {
    600.0
}

fn default_passthrough() -> Vec<String> {
    vec!["PATH".into(), "HOME".into()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSection {
    pub metric: String,
    #[serde(default = "default_direction")]
    pub direction: String,
}

fn default_direction() -> String {
    "minimize".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSection {
    pub metric: String,
    pub op: String,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSection {
    pub n_init: usize,
    pub max_evals: usize,
    #[serde(default = "default_max_failures")]
    pub max_consecutive_failures: usize,
}

fn default_max_failures() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// `neural` or `gp`
    pub kind: String,
    pub hidden1: usize,
    pub hidden2: usize,
    pub features: usize,
    pub ensemble_size: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub final_lr_fraction: f64,
    pub warm_start: bool,
    pub warm_start_steps: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let net = NnFitConfig::default();
        let model = ModelConfig::default();
        Self {
            kind: "neural".into(),
            hidden1: net.hidden1,
            hidden2: net.hidden2,
            features: net.features,
            ensemble_size: model.ensemble_size,
            steps: net.iterations,
            learning_rate: net.learning_rate,
            final_lr_fraction: net.final_lr_fraction,
            warm_start: model.warm_start,
            warm_start_steps: model.warm_start_iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcquisitionSection {
    /// Defaults to `2000·d` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pool_size: Option<usize>,
    pub refine_top: usize,
    pub refine_rounds: usize,
    pub initial_step: f64,
}

impl Default for AcquisitionSection {
    fn default() -> Self {
        let m = MaximizerConfig::default();
        Self {
            pool_size: m.pool_size,
            refine_top: m.refine_top,
            refine_rounds: m.refine_rounds,
            initial_step: m.initial_step,
        }
    }
}

/// Dotted paths accepted by `--override`; a bare leaf name may stand in for
/// any of these when it is unambiguous.
pub const OVERRIDE_KEYS: &[&str] = &[
    "seed",
    "output_dir",
    "strategy",
    "evaluator.kind",
    "evaluator.name",
    "evaluator.command",
    "evaluator.timeout_secs",
    "evaluator.working_dir",
    "objective.metric",
    "objective.direction",
    "budget.n_init",
    "budget.max_evals",
    "budget.max_consecutive_failures",
    "model.kind",
    "model.hidden1",
    "model.hidden2",
    "model.features",
    "model.ensemble_size",
    "model.steps",
    "model.learning_rate",
    "model.final_lr_fraction",
    "model.warm_start",
    "model.warm_start_steps",
    "acquisition.pool_size",
    "acquisition.refine_top",
    "acquisition.refine_rounds",
    "acquisition.initial_step",
];

fn resolve_key(key: &str) -> Result<String, ConfigError> {
    if key.contains('.') {
        return Ok(key.to_string());
    }
    let hits: Vec<&&str> = OVERRIDE_KEYS
        .iter()
        .filter(|k| k.rsplit('.').next() == Some(key))
        .collect();
    match hits.as_slice() {
        [one] => Ok(one.to_string()),
        [] => Err(ConfigError::new(key, "unknown override key")),
        many => Err(ConfigError::new(
            key,
            format!("ambiguous override key, use one of {}", many.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(", ")),
        )),
    }
}

fn parse_value(raw: &str) -> Value {
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.to_string())),
        Err(_) => Value::String(raw.to_string()),
    }
}

/// Applies one `key=value` override to a parsed document.
pub fn apply_override(doc: &mut Table, assignment: &str) -> Result<(), ConfigError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| ConfigError::new(assignment, "override must look like key=value"))?;
    let path = resolve_key(key.trim())?;
    let value = parse_value(raw.trim());
    let mut parts: Vec<&str> = path.split('.').collect();
    let leaf = parts.pop().expect("split yields one part");
    let mut table = doc;
    for (depth, p) in parts.iter().enumerate() {
        let entry = table.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::new(parts[..=depth].join("."), "is not a table"))?;
    }
    table.insert(leaf.to_string(), value);
    Ok(())
}

impl Config {
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut doc: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::new("<file>", e.to_string()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: Config = Config::deserialize(doc).map_err(|e| ConfigError::new(error_key(&e.to_string()), e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("--config", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Everything needed to run, checked against the evaluator's metric list.
    pub fn build(&self) -> Result<Setup, ConfigError> {
        let (evaluator, builtin_problem): (Box<dyn Evaluator>, Option<Problem>) = match self.evaluator.kind.as_str() {
            "builtin" => {
                let name = self
                    .evaluator
                    .name
                    .as_deref()
                    .ok_or_else(|| ConfigError::new("evaluator.name", "required for builtin evaluators"))?;
                let b: Builtin = builtin(name).ok_or_else(|| {
                    ConfigError::new(
                        "evaluator.name",
                        format!("unknown builtin {name:?}; see `nnbo list-builtins`"),
                    )
                })?;
                if let Some(m) = &self.evaluator.metrics {
                    if m != &b.problem.metrics {
                        return Err(ConfigError::new(
                            "evaluator.metrics",
                            format!("builtin {name} reports {:?}", b.problem.metrics),
                        ));
                    }
                }
                let p = b.problem.clone();
                (Box::new(b), Some(p))
            }
            "external" => {
                let command = self
                    .evaluator
                    .command
                    .clone()
                    .ok_or_else(|| ConfigError::new("evaluator.command", "required for external evaluators"))?;
                let metrics = self
                    .evaluator
                    .metrics
                    .clone()
                    .ok_or_else(|| ConfigError::new("evaluator.metrics", "required for external evaluators"))?;
                let mut e = ExternalEvaluator::new(command, metrics, Duration::from_secs_f64(self.evaluator.timeout_secs))
                    .map_err(|e| ConfigError::new("evaluator", e.to_string()))?
                    .with_env_passthrough(self.evaluator.env_passthrough.clone());
                if let Some(dir) = &self.evaluator.working_dir {
                    e = e.with_working_dir(dir);
                }
                (Box::new(e), None)
            }
            other => return Err(ConfigError::new("evaluator.kind", format!("{other:?} is not builtin or external"))),
        };
        let metrics = evaluator.metric_names().to_vec();

        let space = match (&self.space, &builtin_problem) {
            (Some(s), _) => DesignSpace::new(
                s.variables.iter().map(|v| v.name.clone()).collect(),
                s.variables.iter().map(|v| v.lower).collect(),
                s.variables.iter().map(|v| v.upper).collect(),
            )
            .map_err(|e| ConfigError::new("space.variables", e.to_string()))?,
            (None, Some(p)) => p.space.clone(),
            (None, None) => return Err(ConfigError::new("space", "required for external evaluators")),
        };

        let objective = match (&self.objective, &builtin_problem) {
            (Some(o), _) => Objective::new(
                o.metric.clone(),
                o.direction.parse::<Direction>().map_err(|e| ConfigError::new("objective.direction", e.to_string()))?,
            ),
            (None, Some(p)) => p.objective.clone(),
            (None, None) => return Err(ConfigError::new("objective", "required for external evaluators")),
        };
        if !metrics.contains(&objective.metric) {
            return Err(ConfigError::new(
                "objective.metric",
                format!("metric {:?} is not declared by the evaluator", objective.metric),
            ));
        }

        let constraints = match (&self.constraints, &builtin_problem) {
            (Some(cs), _) => cs
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    if !metrics.contains(&c.metric) {
                        return Err(ConfigError::new(
                            format!("constraints[{i}].metric"),
                            format!("metric {:?} is not declared by the evaluator", c.metric),
                        ));
                    }
                    let op = c
                        .op
                        .parse::<ConstraintOp>()
                        .map_err(|e| ConfigError::new(format!("constraints[{i}].op"), e.to_string()))?;
                    Ok(Constraint::new(c.metric.clone(), op, c.bound))
                })
                .collect::<Result<Vec<_>, _>>()?,
            (None, Some(p)) => p.constraints.clone(),
            (None, None) => Vec::new(),
        };

        let problem =
            Problem::new(space, metrics, objective, constraints).map_err(|e| ConfigError::new("constraints", e.to_string()))?;
        Ok(Setup { problem, evaluator, campaign: self.campaign()? })
    }

    fn campaign(&self) -> Result<CampaignConfig, ConfigError> {
        let strategy = match self.strategy.as_str() {
            "bayesian" => Strategy::Bayesian,
            "random" => Strategy::Random,
            other => return Err(ConfigError::new("strategy", format!("{other:?} is not bayesian or random"))),
        };
        let kind = match self.model.kind.as_str() {
            "neural" => SurrogateKind::Neural,
            "gp" => SurrogateKind::Gp,
            other => return Err(ConfigError::new("model.kind", format!("{other:?} is not neural or gp"))),
        };
        let m = &self.model;
        let mut cfg = CampaignConfig::new(self.budget.n_init, self.budget.max_evals, self.seed);
        cfg.strategy = strategy;
        cfg.max_consecutive_failures = self.budget.max_consecutive_failures;
        cfg.model = ModelConfig {
            kind,
            network: NnFitConfig {
                hidden1: m.hidden1,
                hidden2: m.hidden2,
                features: m.features,
                iterations: m.steps,
                learning_rate: m.learning_rate,
                final_lr_fraction: m.final_lr_fraction,
            },
            ensemble_size: m.ensemble_size,
            warm_start: m.warm_start,
            warm_start_iterations: m.warm_start_steps,
            ..ModelConfig::default()
        };
        cfg.acquisition = MaximizerConfig {
            pool_size: self.acquisition.pool_size,
            refine_top: self.acquisition.refine_top,
            refine_rounds: self.acquisition.refine_rounds,
            initial_step: self.acquisition.initial_step,
        };
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        // TOML integers are signed 64-bit.
        if self.seed > i64::MAX as u64 {
            return Err(ConfigError::new("seed", format!("must be at most {}", i64::MAX)));
        }
        let b = &self.budget;
        if b.n_init < 2 {
            return Err(ConfigError::new("budget.n_init", "must be at least 2"));
        }
        if b.max_evals < b.n_init {
            return Err(ConfigError::new("budget.max_evals", format!("must be at least n_init = {}", b.n_init)));
        }
        if b.max_consecutive_failures == 0 {
            return Err(ConfigError::new("budget.max_consecutive_failures", "must be positive"));
        }
        if !(self.evaluator.timeout_secs > 0.0 && self.evaluator.timeout_secs.is_finite()) {
            return Err(ConfigError::new("evaluator.timeout_secs", "must be positive"));
        }
        let m = &self.model;
        for (key, v) in [
            ("model.hidden1", m.hidden1),
            ("model.hidden2", m.hidden2),
            ("model.features", m.features),
            ("model.ensemble_size", m.ensemble_size),
        ] {
            if v == 0 {
                return Err(ConfigError::new(key, "must be positive"));
            }
        }
        if !(m.learning_rate > 0.0 && m.learning_rate.is_finite()) {
            return Err(ConfigError::new("model.learning_rate", "must be positive"));
        }
        if !(m.final_lr_fraction > 0.0 && m.final_lr_fraction <= 1.0) {
            return Err(ConfigError::new("model.final_lr_fraction", "must be in (0, 1]"));
        }
        if self.acquisition.pool_size == Some(0) {
            return Err(ConfigError::new("acquisition.pool_size", "must be positive"));
        }
        if self.acquisition.refine_top == 0 {
            return Err(ConfigError::new("acquisition.refine_top", "must be positive"));
        }
        if !(self.acquisition.initial_step > 0.0 && self.acquisition.initial_step <= 1.0) {
            return Err(ConfigError::new("acquisition.initial_step", "must be in (0, 1]"));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(s) = &self.space {
            if s.variables.is_empty() {
                return Err(ConfigError::new("space.variables", "must not be empty"));
            }
            for (i, v) in s.variables.iter().enumerate() {
                if !seen.insert(&v.name) {
                    return Err(ConfigError::new(format!("space.variables[{i}].name"), format!("duplicate {:?}", v.name)));
                }
                if !(v.lower.is_finite() && v.upper.is_finite() && v.lower < v.upper) {
                    return Err(ConfigError::new(format!("space.variables[{i}]"), "needs finite lower < upper"));
                }
            }
        }
        Ok(())
    }
}

/// Pulls the field name out of a serde message such as "unknown field `x`".
fn error_key(message: &str) -> String {
    message
        .split('`')
        .nth(1)
        .map(str::to_string)
        .unwrap_or_else(|| "<file>".into())
}

pub struct Setup {
    pub problem: Problem,
    pub evaluator: Box<dyn Evaluator>,
    pub campaign: CampaignConfig,
}
