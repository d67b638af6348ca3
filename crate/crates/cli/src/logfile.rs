//! `log.csv`: one row per evaluation.
//!
//! Columns, in order: `iteration`, `phase`, one `var:<name>` column per design
//! variable (physical units), one `metric:<name>` column per evaluator metric,
//! `objective` (declared direction), `direction`, `feasible`, `failed`,
//! `failure_reason`, `wei`, `timestamp` (seconds since the Unix epoch).
//! Failed rows leave the metric and objective cells empty.

use anyhow::{anyhow, bail, Context};
use nnbo_core::bo::CampaignResult;
use nnbo_core::problem::{Direction, Problem};
use std::path::Path;
use std::time::UNIX_EPOCH;

const VAR_PREFIX: &str = "var:";
const METRIC_PREFIX: &str = "metric:";
const TRAILER: [&str; 7] = ["objective", "direction", "feasible", "failed", "failure_reason", "wei", "timestamp"];

#[derive(Debug, Clone, PartialEq)]
pub struct LogSchema {
    pub variables: Vec<String>,
    pub metrics: Vec<String>,
}

impl LogSchema {
    pub fn of(problem: &Problem) -> Self {
        Self {
            variables: problem.space.names().to_vec(),
            metrics: problem.metrics.clone(),
        }
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["iteration".to_string(), "phase".to_string()];
        h.extend(self.variables.iter().map(|v| format!("{VAR_PREFIX}{v}")));
        h.extend(self.metrics.iter().map(|m| format!("{METRIC_PREFIX}{m}")));
        h.extend(TRAILER.iter().map(|s| s.to_string()));
        h
    }

    fn from_header(h: &[String]) -> anyhow::Result<Self> {
        if h.len() < 2 + TRAILER.len() || h[0] != "iteration" || h[1] != "phase" {
            bail!("not a campaign log header");
        }
        let body = &h[2..h.len() - TRAILER.len()];
        if h[h.len() - TRAILER.len()..].iter().zip(TRAILER).any(|(a, b)| a != b) {
            bail!("unexpected trailing columns");
        }
        let mut variables = Vec::new();
        let mut metrics = Vec::new();
        for col in body {
            if let Some(v) = col.strip_prefix(VAR_PREFIX) {
                if !metrics.is_empty() {
                    bail!("variable column {col} after metric columns");
                }
                variables.push(v.to_string());
            } else if let Some(m) = col.strip_prefix(METRIC_PREFIX) {
                metrics.push(m.to_string());
            } else {
                bail!("unexpected column {col}");
            }
        }
        Ok(Self { variables, metrics })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub iteration: usize,
    pub phase: String,
    pub design: Vec<f64>,
    /// `None` for failed evaluations.
    pub metrics: Option<Vec<f64>>,
    pub objective: Option<f64>,
    pub direction: Direction,
    pub feasible: bool,
    pub failure_reason: Option<String>,
    pub wei: Option<f64>,
    pub timestamp: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub schema: LogSchema,
    pub rows: Vec<LogRow>,
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

pub fn write_log(path: &Path, problem: &Problem, result: &CampaignResult) -> anyhow::Result<()> {
    let schema = LogSchema::of(problem);
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(schema.header())?;
    for e in &result.entries {
        let mut rec = vec![e.iteration.to_string(), e.phase.to_string()];
        rec.extend(e.design.iter().map(|v| format!("{v}")));
        match &e.outcome {
            Ok(m) => {
                rec.extend(m.iter().map(|v| format!("{v}")));
                rec.push(format!("{}", problem.objective_value(m)));
            }
            Err(_) => rec.extend(std::iter::repeat_n(String::new(), schema.metrics.len() + 1)),
        }
        rec.push(problem.objective.direction.to_string());
        rec.push(e.feasible.to_string());
        rec.push(e.outcome.is_err().to_string());
        rec.push(e.outcome.as_ref().err().map(|f| f.to_string()).unwrap_or_default());
        rec.push(cell(e.proposal_wei));
        let t = e.timestamp.duration_since(UNIX_EPOCH).unwrap_or_default();
        rec.push(format!("{}.{:06}", t.as_secs(), t.subsec_micros()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_opt(s: &str, what: &str) -> anyhow::Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>().map(Some).map_err(|e| anyhow!("bad {what} value {s:?}: {e}"))
}

fn parse_bool(s: &str) -> anyhow::Result<bool> {
    s.parse::<bool>().map_err(|_| anyhow!("bad boolean {s:?}"))
}

pub fn read_log(path: &Path) -> anyhow::Result<RunLog> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let schema = LogSchema::from_header(&header).with_context(|| format!("reading {}", path.display()))?;
    let nv = schema.variables.len();
    let nm = schema.metrics.len();
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let ctx = || format!("{} row {}", path.display(), line + 1);
        let f = |i: usize| rec.get(i).unwrap_or("");
        let design = (0..nv)
            .map(|i| f(2 + i).parse::<f64>().map_err(|e| anyhow!("bad design value: {e}")))
            .collect::<anyhow::Result<Vec<_>>>()
            .with_context(ctx)?;
        let failed = parse_bool(f(2 + nv + nm + 3)).with_context(ctx)?;
        let metrics = if failed {
            None
        } else {
            Some(
                (0..nm)
                    .map(|i| f(2 + nv + i).parse::<f64>().map_err(|e| anyhow!("bad metric value: {e}")))
                    .collect::<anyhow::Result<Vec<_>>>()
                    .with_context(ctx)?,
            )
        };
        let t = 2 + nv + nm;
        let reason = f(t + 4);
        rows.push(LogRow {
            iteration: f(0).parse().map_err(|e| anyhow!("bad iteration: {e}")).with_context(ctx)?,
            phase: f(1).to_string(),
            design,
            metrics,
            objective: parse_opt(f(t), "objective").with_context(ctx)?,
            direction: f(t + 1).parse().map_err(|e| anyhow!("{e}")).with_context(ctx)?,
            feasible: parse_bool(f(t + 2)).with_context(ctx)?,
            failure_reason: (!reason.is_empty()).then(|| reason.to_string()),
            wei: parse_opt(f(t + 5), "wei").with_context(ctx)?,
            timestamp: f(t + 6).to_string(),
        });
    }
    Ok(RunLog { schema, rows })
}
