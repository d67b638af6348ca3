//! Objective and constraint declarations. Everything downstream minimizes
//! and treats a constraint as satisfied when its margin is negative.

use crate::design_space::DesignSpace;
use crate::{Error, Result};
use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Minimize,
    Maximize,
}

impl FromStr for Direction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minimize" | "min" => Ok(Direction::Minimize),
            "maximize" | "max" => Ok(Direction::Maximize),
            _ => Err(Error::Parse(format!("unknown direction {s:?} (minimize|maximize)"))),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Minimize => "minimize",
            Direction::Maximize => "maximize",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintOp {
    Less,
    Greater,
}

impl FromStr for ConstraintOp {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "<" | "lt" => Ok(ConstraintOp::Less),
            ">" | "gt" => Ok(ConstraintOp::Greater),
            _ => Err(Error::Parse(format!("unknown constraint operator {s:?} (< or >)"))),
        }
    }
}

impl fmt::Display for ConstraintOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConstraintOp::Less => "<",
            ConstraintOp::Greater => ">",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub metric: String,
    pub direction: Direction,
}

impl Objective {
    pub fn new(metric: impl Into<String>, direction: Direction) -> Self {
        Self { metric: metric.into(), direction }
    }

    /// Value in minimization form.
    pub fn to_min(&self, raw: f64) -> f64 {
        match self.direction {
            Direction::Minimize => raw,
            Direction::Maximize => -raw,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub metric: String,
    pub op: ConstraintOp,
    pub bound: f64,
}

impl Constraint {
    pub fn new(metric: impl Into<String>, op: ConstraintOp, bound: f64) -> Self {
        Self { metric: metric.into(), op, bound }
    }

    /// `g` with the constraint satisfied iff `g < 0`.
    pub fn margin(&self, raw: f64) -> f64 {
        match self.op {
            ConstraintOp::Less => raw - self.bound,
            ConstraintOp::Greater => self.bound - raw,
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.metric, self.op, self.bound)
    }
}

pub(crate) fn check_unique_names(names: &[String]) -> Result<()> {
    let mut seen = HashSet::new();
    for n in names {
        if n.is_empty() {
            return Err(Error::InvalidArgument("empty metric name".into()));
        }
        if !seen.insert(n.as_str()) {
            return Err(Error::InvalidArgument(format!("duplicate metric name {n:?}")));
        }
    }
    Ok(())
}

/// A design space, the evaluator's metric list and what to do with it.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub space: DesignSpace,
    pub metrics: Vec<String>,
    pub objective: Objective,
    pub constraints: Vec<Constraint>,
    objective_index: usize,
    constraint_indices: Vec<usize>,
}

/// One evaluation after direction and constraint normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub objective: f64,
    pub margins: Vec<f64>,
}

impl Ingested {
    pub fn feasible(&self) -> bool {
        self.margins.iter().all(|&g| g < 0.0)
    }
}

impl Problem {
    pub fn new(
        space: DesignSpace,
        metrics: Vec<String>,
        objective: Objective,
        constraints: Vec<Constraint>,
    ) -> Result<Self> {
        check_unique_names(&metrics)?;
        let find = |name: &str, role: &str| {
            metrics
                .iter()
                .position(|m| m == name)
                .ok_or_else(|| Error::InvalidArgument(format!("{role} metric {name:?} is not declared by the evaluator")))
        };
        let objective_index = find(&objective.metric, "objective")?;
        let constraint_indices = constraints
            .iter()
            .map(|c| {
                if !c.bound.is_finite() {
                    return Err(Error::InvalidArgument(format!("constraint bound for {:?} is not finite", c.metric)));
                }
                find(&c.metric, "constraint")
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            space,
            metrics,
            objective,
            constraints,
            objective_index,
            constraint_indices,
        })
    }

    pub fn ingest(&self, raw: &[f64]) -> Result<Ingested> {
        if raw.len() != self.metrics.len() {
            return Err(Error::DimensionMismatch { expected: self.metrics.len(), got: raw.len() });
        }
        Ok(Ingested {
            objective: self.objective.to_min(raw[self.objective_index]),
            margins: self
                .constraints
                .iter()
                .zip(&self.constraint_indices)
                .map(|(c, &i)| c.margin(raw[i]))
                .collect(),
        })
    }

    /// Raw objective value (in its declared direction) from metric values.
    pub fn objective_value(&self, raw: &[f64]) -> f64 {
        raw[self.objective_index]
    }
}
