use clap::{Parser, Subcommand};
use nnbo_cli::bench::{cmd_bench_scaling, BenchOptions, DEFAULT_REPEATS, DEFAULT_SIZES};
use nnbo_cli::config::Config;
use nnbo_cli::report::cmd_report;
use nnbo_cli::run::cmd_run;
use nnbo_cli::CliError;
use nnbo_core::evaluator::{builtin, builtin_names};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "nnbo", version, about = "Constrained Bayesian optimization with neural-network surrogates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Campaign configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// `key=value` applied on top of the file; repeatable.
    #[arg(long = "override", value_name = "K=V")]
    overrides: Vec<String>,
    /// Output directory, replacing `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Shorthand for `--override seed=N`.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> Result<Config, CliError> {
        let mut overrides = self.overrides.clone();
        if let Some(s) = self.seed {
            overrides.push(format!("seed={s}"));
        }
        let mut cfg = Config::load(&self.config, &overrides)?;
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one optimization campaign.
    Run(ConfigArgs),
    /// Summarize campaign logs of the same problem.
    Report {
        /// `log.csv` files, one per campaign.
        #[arg(required = true)]
        logs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time one training step against the number of observations.
    BenchScaling {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SIZES.to_vec())]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = DEFAULT_REPEATS)]
        repeats: usize,
    },
    /// List the builtin evaluators.
    ListBuiltins,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => args.load().and_then(|cfg| {
            cmd_run(&cfg)?;
            let summary = std::fs::read_to_string(cfg.output_dir.join("summary.txt")).unwrap_or_default();
            print!("{summary}");
            Ok(())
        }),
        Command::Report { logs, out } => cmd_report(&logs, &out).map(|r| print!("{}", r.render())),
        Command::BenchScaling { config, sizes, repeats } => config.load().and_then(|cfg| {
            let opts = BenchOptions { sizes, repeats, ..BenchOptions::default() };
            for t in cmd_bench_scaling(&cfg, &opts)? {
                println!("n = {:5}  nn {:.4e} s  gp {:.4e} s", t.n, t.nn_seconds, t.gp_seconds);
            }
            Ok(())
        }),
        Command::ListBuiltins => {
            for name in builtin_names() {
                let b = builtin(name).expect("listed builtins exist");
                println!(
                    "{name:<14} d={:<3} metrics={}  {}",
                    b.problem.space.dim(),
                    b.problem.metrics.join(","),
                    b.description
                );
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
