//! Black-box evaluation: the external-process protocol, corner aggregation and
//! the builtin analytic problems.

mod builtin;
mod chargepump;
mod corners;
mod opamp;

pub use builtin::{
    builtin, builtin_constrained_suite, builtin_names, certify_optimum, lattice, Builtin, Certificate, Reference,
};
pub use chargepump::{chargepump_corner_currents, chargepump_corners, chargepump_metrics, ChargePumpCorner, CHARGEPUMP_CORNERS};
pub use corners::{corner_aggregate, corner_aggregate_with, fom, AggregateWeights, CornerAggregate, CornerCurrents};
pub use opamp::{opamp_metrics, OpampMetrics};

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::{mpsc, Mutex};
use std::time::Duration;
use wait_timeout::ChildExt;

/// Why one evaluation produced no metrics.
#[derive(Debug, Clone, PartialEq)]
pub enum EvalFailure {
    ExitStatus(Option<i32>),
    Arity { expected: usize, got: usize },
    Parse(String),
    NonFinite(String),
    Timeout(Duration),
    Spawn(String),
    Io(String),
    Domain(String),
}

impl EvalFailure {
    /// Short stable identifier written to the log.
    pub fn kind(&self) -> &'static str {
        match self {
            EvalFailure::ExitStatus(_) => "exit-status",
            EvalFailure::Arity { .. } => "arity",
            EvalFailure::Parse(_) => "parse",
            EvalFailure::NonFinite(_) => "non-finite",
            EvalFailure::Timeout(_) => "timeout",
            EvalFailure::Spawn(_) => "spawn",
            EvalFailure::Io(_) => "io",
            EvalFailure::Domain(_) => "domain",
        }
    }

    /// Failures that will not go away by trying another design.
    pub fn is_fatal(&self) -> bool {
        matches!(self, EvalFailure::Spawn(_))
    }
}

impl fmt::Display for EvalFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalFailure::ExitStatus(Some(c)) => write!(f, "exit-status: code {c}"),
            EvalFailure::ExitStatus(None) => write!(f, "exit-status: terminated by signal"),
            EvalFailure::Arity { expected, got } => write!(f, "arity: expected {expected} metrics, got {got}"),
            EvalFailure::Parse(s) => write!(f, "parse: {s}"),
            EvalFailure::NonFinite(s) => write!(f, "non-finite: {s}"),
            EvalFailure::Timeout(d) => write!(f, "timeout: no result within {:.3}s", d.as_secs_f64()),
            EvalFailure::Spawn(s) => write!(f, "spawn: {s}"),
            EvalFailure::Io(s) => write!(f, "io: {s}"),
            EvalFailure::Domain(s) => write!(f, "domain: {s}"),
        }
    }
}

/// Maps a design in physical units to metric values in declared order.
pub trait Evaluator: Send + Sync {
    fn metric_names(&self) -> &[String];
    fn evaluate(&self, design: &[f64]) -> std::result::Result<Vec<f64>, EvalFailure>;
}

/// Comma-separated shortest round-trip formatting, no terminator.
pub fn format_design(design: &[f64]) -> String {
    design.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(",")
}

/// Parses one protocol line into exactly `expected` finite values.
pub fn parse_metrics(line: &str, expected: usize) -> std::result::Result<Vec<f64>, EvalFailure> {
    let line = line.trim_end_matches(['\n', '\r']);
    let fields: Vec<&str> = if line.trim().is_empty() { Vec::new() } else { line.split(',').collect() };
    if fields.len() != expected {
        return Err(EvalFailure::Arity { expected, got: fields.len() });
    }
    fields
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let v: f64 = s
                .trim()
                .parse()
                .map_err(|_| EvalFailure::Parse(format!("field {i} = {s:?}")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(EvalFailure::NonFinite(format!("field {i} = {s:?}")))
            }
        })
        .collect()
}

/// Runs a shell command once per design: the design goes to stdin as one CSV
/// line and one CSV line of metrics is read back from stdout.
pub struct ExternalEvaluator {
    command: String,
    metrics: Vec<String>,
    timeout: Duration,
    working_dir: Option<PathBuf>,
    env_passthrough: Vec<String>,
    lock: Mutex<()>,
}

impl ExternalEvaluator {
    pub fn new(command: impl Into<String>, metrics: Vec<String>, timeout: Duration) -> crate::Result<Self> {
        let command = command.into();
        if command.trim().is_empty() {
            return Err(crate::Error::InvalidArgument("evaluator command is empty".into()));
        }
        if timeout.is_zero() {
            return Err(crate::Error::InvalidArgument("evaluator timeout must be positive".into()));
        }
        crate::problem::check_unique_names(&metrics)?;
        Ok(Self {
            command,
            metrics,
            timeout,
            working_dir: None,
            env_passthrough: vec!["PATH".into(), "HOME".into()],
            lock: Mutex::new(()),
        })
    }

    pub fn with_working_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.working_dir = Some(dir.into());
        self
    }

    /// Environment variables copied from this process; everything else is cleared.
    pub fn with_env_passthrough(mut self, names: Vec<String>) -> Self {
        self.env_passthrough = names;
        self
    }

    fn run(&self, design: &[f64]) -> std::result::Result<Vec<f64>, EvalFailure> {
        let mut cmd = Command::new("/bin/sh");
        cmd.arg("-c")
            .arg(&self.command)
            .env_clear()
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null());
        for name in &self.env_passthrough {
            if let Some(v) = std::env::var_os(name) {
                cmd.env(name, v);
            }
        }
        if let Some(dir) = &self.working_dir {
            cmd.current_dir(dir);
        }
        let mut child = cmd.spawn().map_err(|e| EvalFailure::Spawn(e.to_string()))?;

        let mut stdin = child.stdin.take().expect("stdin is piped");
        let line = format!("{}\n", format_design(design));
        // A child that exits without reading closes the pipe; its status decides.
        let _ = stdin.write_all(line.as_bytes());
        drop(stdin);

        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            let mut first = String::new();
            let res = BufReader::new(stdout).read_line(&mut first).map(|_| first);
            let _ = tx.send(res);
        });

        let status = match child.wait_timeout(self.timeout) {
            Ok(Some(s)) => s,
            Ok(None) => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(EvalFailure::Timeout(self.timeout));
            }
            Err(e) => return Err(EvalFailure::Io(e.to_string())),
        };
        if !status.success() {
            return Err(EvalFailure::ExitStatus(status.code()));
        }
        // The shell has exited; a lingering grandchild may still hold stdout.
        let output = match rx.recv_timeout(self.timeout) {
            Ok(Ok(s)) => s,
            Ok(Err(e)) => return Err(EvalFailure::Io(e.to_string())),
            Err(_) => return Err(EvalFailure::Timeout(self.timeout)),
        };
        parse_metrics(&output, self.metrics.len())
    }
}

impl Evaluator for ExternalEvaluator {
    fn metric_names(&self) -> &[String] {
        &self.metrics
    }

    fn evaluate(&self, design: &[f64]) -> std::result::Result<Vec<f64>, EvalFailure> {
        let _guard = self.lock.lock().unwrap_or_else(|p| p.into_inner());
        self.run(design)
    }
}
