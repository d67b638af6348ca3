//! `nnbo run`: execute one campaign and write its output files.
//!
//! `trace.csv` columns: `iteration`, `best_so_far` (declared direction, empty
//! until the first feasible evaluation), `proposal_wei` (empty for designs
//! that were not chosen by the acquisition function).

use crate::config::Config;
use crate::logfile::write_log;
use crate::CliError;
use anyhow::Context;
use nnbo_core::bo::{run_campaign, CampaignResult, Termination};
use nnbo_core::problem::{Direction, Problem};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

/// Converts a minimization-form objective back to its declared direction.
pub fn declared(direction: Direction, min_form: f64) -> f64 {
    match direction {
        Direction::Minimize => min_form,
        Direction::Maximize => -min_form,
    }
}

pub fn cmd_run(config: &Config) -> Result<CampaignResult, CliError> {
    let setup = config.build()?;
    let out = &config.output_dir;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("config.toml"), config.to_toml()).context("writing config.toml")?;

    log::info!(
        "campaign: {} evaluations ({} initial), seed {}",
        setup.campaign.max_evals,
        setup.campaign.n_init,
        setup.campaign.seed
    );
    let result = run_campaign(&setup.problem, setup.evaluator.as_ref(), &setup.campaign)
        .map_err(|e| CliError::Other(anyhow::anyhow!("campaign failed: {e}")))?;

    write_log(&out.join("log.csv"), &setup.problem, &result)?;
    write_trace(&out.join("trace.csv"), &setup.problem, &result)?;
    fs::write(out.join("summary.txt"), summary(&setup.problem, &result)).context("writing summary.txt")?;

    match &result.termination {
        Termination::BudgetExhausted => Ok(result),
        Termination::EvaluatorFatal(why) => Err(CliError::EvaluatorFatal(format!(
            "evaluator fatal after {} evaluations: {why}",
            result.entries.len()
        ))),
    }
}

fn write_trace(path: &Path, problem: &Problem, result: &CampaignResult) -> anyhow::Result<()> {
    let dir = problem.objective.direction;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iteration", "best_so_far", "proposal_wei"])?;
    for (e, best) in result.entries.iter().zip(&result.best_trace) {
        w.write_record([
            e.iteration.to_string(),
            best.map(|b| format!("{}", declared(dir, b))).unwrap_or_default(),
            e.proposal_wei.map(|v| format!("{v}")).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn summary(problem: &Problem, result: &CampaignResult) -> String {
    let mut s = String::new();
    let failed = result.entries.iter().filter(|e| e.outcome.is_err()).count();
    let _ = writeln!(s, "evaluations: {}", result.entries.len());
    let _ = writeln!(s, "failed evaluations: {failed}");
    let _ = writeln!(s, "termination: {}", result.termination);
    let _ = writeln!(
        s,
        "objective: {} {}",
        problem.objective.direction, problem.objective.metric
    );
    match result.best_index() {
        Some(i) => {
            let e = &result.entries[i];
            let metrics = e.outcome.as_ref().expect("feasible entries have metrics");
            let _ = writeln!(s, "best objective: {}", problem.objective_value(metrics));
            let _ = writeln!(s, "best iteration: {}", e.iteration);
            let _ = writeln!(
                s,
                "first feasible at evaluation: {}",
                result.evals_to_feasible().expect("a feasible entry exists")
            );
            let _ = writeln!(s, "best design:");
            for (name, v) in problem.space.names().iter().zip(&e.design) {
                let _ = writeln!(s, "  {name} = {v}");
            }
            let _ = writeln!(s, "metrics at best design:");
            for (name, v) in problem.metrics.iter().zip(metrics) {
                let _ = writeln!(s, "  {name} = {v}");
            }
        }
        None => {
            let _ = writeln!(s, "best objective: none (no feasible design found)");
        }
    }
    s
}
