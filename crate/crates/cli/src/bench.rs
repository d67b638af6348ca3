//! `nnbo bench-scaling`: wall-time of one surrogate training step against
//! the number of observations.
//!
//! `timing.csv` columns: `n`, `nn_seconds` (one neural log-likelihood plus
//! gradient evaluation at the configured architecture), `gp_seconds` (one
//! exact GP marginal log-likelihood). Each cell is the fastest of several
//! repeats; a repeat averages enough calls to last at least `min_sample`.
//! Every repeat round visits all sizes in turn.

use crate::config::{Config, ConfigError};
use crate::CliError;
use anyhow::Context;
use nnbo_core::design_space::lhs_unit;
use nnbo_core::evaluator::{builtin, Builtin};
use nnbo_core::gp::{gp_log_likelihood, KernelHyperparams};
use nnbo_core::neural::{nn_likelihood_grad, Theta};
use nnbo_core::rng::{derive, rng_from, TAG_INITIAL_DESIGN, TAG_SURROGATE};
use std::hint::black_box;
use std::path::Path;
use std::time::{Duration, Instant};

pub const DEFAULT_SIZES: &[usize] = &[200, 400, 800, 1600];
/// Many short repeats: timing noise on a shared core comes in bursts.
pub const DEFAULT_REPEATS: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    pub n: usize,
    pub nn_seconds: f64,
    pub gp_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub sizes: Vec<usize>,
    pub repeats: usize,
    pub min_sample: Duration,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            sizes: DEFAULT_SIZES.to_vec(),
            repeats: DEFAULT_REPEATS,
            min_sample: Duration::from_millis(50),
        }
    }
}

/// Calls of `f` needed for one sample to last at least `min_sample`.
fn calibrate(min_sample: Duration, f: &mut dyn FnMut()) -> u32 {
    let t = Instant::now();
    f();
    let once = t.elapsed().max(Duration::from_nanos(100));
    (min_sample.as_secs_f64() / once.as_secs_f64()).ceil().max(1.0) as u32
}

/// Seconds per call, averaged over one batch of `calls`.
fn sample(calls: u32, f: &mut dyn FnMut()) -> f64 {
    let t = Instant::now();
    for _ in 0..calls {
        f();
    }
    t.elapsed().as_secs_f64() / calls as f64
}

fn bench_builtin(config: &Config) -> Result<Builtin, CliError> {
    if config.evaluator.kind != "builtin" {
        return Err(ConfigError {
            key: "evaluator.kind".into(),
            message: "bench-scaling needs a builtin evaluator".into(),
        }
        .into());
    }
    let name = config.evaluator.name.as_deref().unwrap_or_default();
    builtin(name)
        .ok_or_else(|| {
            ConfigError {
                key: "evaluator.name".into(),
                message: format!("unknown builtin {name:?}"),
            }
            .into()
        })
}

pub fn bench_scaling(config: &Config, opts: &BenchOptions) -> Result<Vec<Timing>, CliError> {
    let b = bench_builtin(config)?;
    let setup = config.build()?;
    let net = &setup.campaign.model.network;
    let dim = b.problem.space.dim();
    let arch = net.architecture(dim);
    let theta = Theta::random(arch, &mut rng_from(derive(config.seed, TAG_SURROGATE, 0)))
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let hyper = KernelHyperparams::new(1.0, vec![0.5; dim], 0.1, 0.0).map_err(|e| anyhow::anyhow!("{e}"))?;

    let mut data = Vec::with_capacity(opts.sizes.len());
    for &n in &opts.sizes {
        let mut rng = rng_from(derive(config.seed, TAG_INITIAL_DESIGN, n as u64));
        let xs = lhs_unit(dim, n, &mut rng).map_err(|e| anyhow::anyhow!("{e}"))?;
        let y = xs
            .iter()
            .map(|u| {
                let d = b.problem.space.denormalize(u)?;
                let m = b.metrics_at(&d.0)?;
                b.problem.ingest(&m).map(|i| i.objective)
            })
            .collect::<nnbo_core::Result<Vec<f64>>>()
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        let mu = y.iter().sum::<f64>() / n as f64;
        let sd = (y.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n as f64).sqrt().max(1e-12);
        let y: Vec<f64> = y.iter().map(|v| (v - mu) / sd).collect();
        data.push((xs, y));
    }

    // Sizes are interleaved within each repeat so that a slow stretch of the
    // machine inflates every size alike instead of skewing one ratio.
    let nn_call = |(xs, y): &(Vec<Vec<f64>>, Vec<f64>)| {
        black_box(nn_likelihood_grad(&theta, xs, y).ok());
    };
    let gp_call = |(xs, y): &(Vec<Vec<f64>>, Vec<f64>)| {
        black_box(gp_log_likelihood(&hyper, xs, y).ok());
    };
    let calls: Vec<(u32, u32)> = data
        .iter()
        .map(|d| {
            (
                calibrate(opts.min_sample, &mut || nn_call(d)),
                calibrate(opts.min_sample, &mut || gp_call(d)),
            )
        })
        .collect();
    let mut out: Vec<Timing> = opts
        .sizes
        .iter()
        .map(|&n| Timing { n, nn_seconds: f64::INFINITY, gp_seconds: f64::INFINITY })
        .collect();
    for _ in 0..opts.repeats.max(1) {
        for ((t, d), &(nn_calls, gp_calls)) in out.iter_mut().zip(&data).zip(&calls) {
            t.nn_seconds = t.nn_seconds.min(sample(nn_calls, &mut || nn_call(d)));
            t.gp_seconds = t.gp_seconds.min(sample(gp_calls, &mut || gp_call(d)));
        }
    }
    for t in &out {
        log::info!("n = {}: nn {:.3e} s, gp {:.3e} s", t.n, t.nn_seconds, t.gp_seconds);
    }
    Ok(out)
}

pub fn write_timing(path: &Path, rows: &[Timing]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["n", "nn_seconds", "gp_seconds"])?;
    for r in rows {
        w.write_record([r.n.to_string(), format!("{}", r.nn_seconds), format!("{}", r.gp_seconds)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_bench_scaling(config: &Config, opts: &BenchOptions) -> Result<Vec<Timing>, CliError> {
    let rows = bench_scaling(config, opts)?;
    std::fs::create_dir_all(&config.output_dir).with_context(|| format!("creating {}", config.output_dir.display()))?;
    write_timing(&config.output_dir.join("timing.csv"), &rows)?;
    Ok(rows)
}
