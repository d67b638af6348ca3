//! `nnbo report`: tables over several campaign logs of the same problem.
//!
//! `report.csv` has columns `row`, `source`, `objective`, one column per
//! metric, and `sims_to_feasible`. There is one `runN` row per log holding the
//! final best feasible objective and the metrics of that design, followed by
//! `mean`, `median`, `best` and `worst` rows over the successful runs and a
//! `successes` row whose `objective` cell counts runs that found a feasible
//! design. `mean` and `median` are taken column by column; `best` and `worst`
//! repeat the row of the corresponding run. The `sims_to_feasible` cell of the
//! `mean` row is the average number of evaluations needed to reach
//! feasibility.
//!
//! `convergence.csv` has an `iteration` column and one `runN` column with the
//! best feasible objective so far, empty before the first feasible design or
//! past the end of a shorter run.

use crate::logfile::{read_log, LogSchema, RunLog};
use crate::CliError;
use anyhow::Context;
use nnbo_core::problem::Direction;
use std::cmp::Ordering;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub source: String,
    pub evaluations: usize,
    /// Best feasible objective in declared direction.
    pub final_best: Option<f64>,
    pub best_metrics: Option<Vec<f64>>,
    pub sims_to_feasible: Option<usize>,
    /// Best feasible objective after each evaluation.
    pub trace: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatRow {
    pub objective: f64,
    pub metrics: Vec<f64>,
    pub sims_to_feasible: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub schema: LogSchema,
    pub direction: Direction,
    pub runs: Vec<RunSummary>,
    /// `None` when no run found a feasible design.
    pub mean: Option<StatRow>,
    pub median: Option<StatRow>,
    pub best: Option<StatRow>,
    pub worst: Option<StatRow>,
    pub successes: usize,
}

/// True when `a` is a better objective than `b` in the given direction.
fn better(direction: Direction, a: f64, b: f64) -> bool {
    match direction {
        Direction::Minimize => a < b,
        Direction::Maximize => a > b,
    }
}

pub fn summarize_run(source: String, log: &RunLog, direction: Direction) -> RunSummary {
    let mut best: Option<(f64, &Vec<f64>)> = None;
    let mut trace = Vec::with_capacity(log.rows.len());
    for row in &log.rows {
        if let (true, Some(v), Some(m)) = (row.feasible, row.objective, &row.metrics) {
            if best.is_none_or(|(b, _)| better(direction, v, b)) {
                best = Some((v, m));
            }
        }
        trace.push(best.map(|(b, _)| b));
    }
    RunSummary {
        source,
        evaluations: log.rows.len(),
        final_best: best.map(|(b, _)| b),
        best_metrics: best.map(|(_, m)| m.clone()),
        sims_to_feasible: log.rows.iter().position(|r| r.feasible).map(|i| i + 1),
        trace,
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

pub fn analyze(logs: Vec<(String, RunLog)>) -> Result<Report, CliError> {
    let Some((first_src, first)) = logs.first() else {
        return Err(CliError::Incompatible("no logs given".into()));
    };
    let schema = first.schema.clone();
    let direction = first
        .rows
        .first()
        .map(|r| r.direction)
        .ok_or_else(|| CliError::Incompatible(format!("{first_src} has no rows")))?;
    for (src, log) in &logs {
        if log.schema != schema {
            return Err(CliError::Incompatible(format!(
                "{src} has columns {:?} / {:?}, expected {:?} / {:?} as in {first_src}",
                log.schema.variables, log.schema.metrics, schema.variables, schema.metrics
            )));
        }
        if log.rows.iter().any(|r| r.direction != direction) {
            return Err(CliError::Incompatible(format!("{src} mixes objective directions")));
        }
    }

    let runs: Vec<RunSummary> = logs
        .iter()
        .map(|(src, log)| summarize_run(src.clone(), log, direction))
        .collect();
    let ok: Vec<&RunSummary> = runs.iter().filter(|r| r.final_best.is_some()).collect();
    let successes = ok.len();

    let (mut mean_row, mut median_row, mut best_row, mut worst_row) = (None, None, None, None);
    if !ok.is_empty() {
        let objectives: Vec<f64> = ok.iter().map(|r| r.final_best.expect("filtered")).collect();
        let sims: Vec<f64> = ok.iter().map(|r| r.sims_to_feasible.expect("feasible run") as f64).collect();
        let column = |j: usize| -> Vec<f64> { ok.iter().map(|r| r.best_metrics.as_ref().expect("feasible run")[j]).collect() };
        let nm = schema.metrics.len();
        mean_row = Some(StatRow {
            objective: mean(&objectives),
            metrics: (0..nm).map(|j| mean(&column(j))).collect(),
            sims_to_feasible: mean(&sims),
        });
        median_row = Some(StatRow {
            objective: median(&objectives),
            metrics: (0..nm).map(|j| median(&column(j))).collect(),
            sims_to_feasible: median(&sims),
        });
        let row_of = |r: &RunSummary| StatRow {
            objective: r.final_best.expect("feasible run"),
            metrics: r.best_metrics.clone().expect("feasible run"),
            sims_to_feasible: r.sims_to_feasible.expect("feasible run") as f64,
        };
        let mut b = ok[0];
        let mut w = ok[0];
        for r in &ok[1..] {
            let v = r.final_best.expect("filtered");
            if better(direction, v, b.final_best.expect("filtered")) {
                b = r;
            }
            if better(direction, w.final_best.expect("filtered"), v) {
                w = r;
            }
        }
        best_row = Some(row_of(b));
        worst_row = Some(row_of(w));
    }

    Ok(Report {
        schema,
        direction,
        runs,
        mean: mean_row,
        median: median_row,
        best: best_row,
        worst: worst_row,
        successes,
    })
}

fn num(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

impl Report {
    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["row".to_string(), "source".to_string(), "objective".to_string()];
        h.extend(self.schema.metrics.iter().cloned());
        h.push("sims_to_feasible".into());
        h
    }

    pub fn rows(&self) -> Vec<Vec<String>> {
        let nm = self.schema.metrics.len();
        let mut out = Vec::new();
        for (i, r) in self.runs.iter().enumerate() {
            let mut rec = vec![format!("run{}", i + 1), r.source.clone(), num(r.final_best)];
            match &r.best_metrics {
                Some(m) => rec.extend(m.iter().map(|v| format!("{v}"))),
                None => rec.extend(std::iter::repeat_n(String::new(), nm)),
            }
            rec.push(r.sims_to_feasible.map(|s| s.to_string()).unwrap_or_default());
            out.push(rec);
        }
        for (label, stat) in [("mean", &self.mean), ("median", &self.median), ("best", &self.best), ("worst", &self.worst)] {
            let mut rec = vec![label.to_string(), String::new()];
            match stat {
                Some(s) => {
                    rec.push(format!("{}", s.objective));
                    rec.extend(s.metrics.iter().map(|v| format!("{v}")));
                    rec.push(format!("{}", s.sims_to_feasible));
                }
                None => rec.extend(std::iter::repeat_n(String::new(), nm + 2)),
            }
            out.push(rec);
        }
        let mut rec = vec!["successes".to_string(), String::new(), self.successes.to_string()];
        rec.extend(std::iter::repeat_n(String::new(), nm + 1));
        out.push(rec);
        out
    }

    /// Merged best-so-far curves, one column per run.
    pub fn convergence(&self) -> (Vec<String>, Vec<Vec<String>>) {
        let mut h = vec!["iteration".to_string()];
        h.extend((1..=self.runs.len()).map(|i| format!("run{i}")));
        let len = self.runs.iter().map(|r| r.trace.len()).max().unwrap_or(0);
        let rows = (0..len)
            .map(|t| {
                let mut rec = vec![(t + 1).to_string()];
                rec.extend(self.runs.iter().map(|r| num(r.trace.get(t).copied().flatten())));
                rec
            })
            .collect();
        (h, rows)
    }

    /// Aligned plain-text rendering of `report.csv`.
    pub fn render(&self) -> String {
        let mut table = vec![self.header()];
        table.extend(self.rows());
        let ncol = table[0].len();
        let widths: Vec<usize> = (0..ncol)
            .map(|j| table.iter().map(|r| r[j].chars().count()).max().unwrap_or(0))
            .collect();
        let mut s = String::new();
        for r in &table {
            let line: Vec<String> = r.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            s.push_str(line.join("  ").trim_end());
            s.push('\n');
        }
        s
    }
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_report(logs: &[PathBuf], out: &Path) -> Result<Report, CliError> {
    let parsed = logs
        .iter()
        .map(|p| {
            read_log(p)
                .map(|l| (p.display().to_string(), l))
                .map_err(|e| CliError::Incompatible(format!("{e:#}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let report = analyze(parsed)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_csv(&out.join("report.csv"), &report.header(), &report.rows())?;
    let (h, rows) = report.convergence();
    write_csv(&out.join("convergence.csv"), &h, &rows)?;
    Ok(report)
}
