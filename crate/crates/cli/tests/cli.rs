mod common;

use common::{column, nnbo, read_csv, write_config, FAST_MODEL};
use nnbo_cli::logfile::read_log;
use nnbo_cli::report::{analyze, summarize_run};
use nnbo_core::problem::Direction;
use rand::{Rng, SeedableRng};
use std::path::Path;

fn quadratic(dir: &Path, max_evals: usize) -> std::path::PathBuf {
    let text = format!(
        "seed = 7\noutput_dir = \"{}\"\n[evaluator]\nkind = \"builtin\"\nname = \"quadratic1d\"\n[budget]\nn_init = 4\nmax_evals = {max_evals}\n{FAST_MODEL}",
        dir.join("out").display()
    );
    write_config(dir, "q.toml", &text)
}

fn run_ok(args: &[&str]) {
    let o = nnbo(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn run_writes_all_outputs_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quadratic(tmp.path(), 12);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    run_ok(&["run", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    run_ok(&["run", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    for f in ["log.csv", "trace.csv", "summary.txt", "config.toml"] {
        assert!(a.join(f).exists(), "{f}");
    }
    assert_eq!(std::fs::read(a.join("trace.csv")).unwrap(), std::fs::read(b.join("trace.csv")).unwrap());

    let (h, rows) = read_csv(&a.join("log.csv"));
    assert_eq!(rows.len(), 12);
    assert_eq!(&h[..4], ["iteration", "phase", "var:x", "metric:f"]);
    assert_eq!(h.last().unwrap(), "timestamp");
    let phase = column(&h, "phase");
    assert!(rows[..4].iter().all(|r| r[phase] == "init"));
    assert!(rows[4..].iter().all(|r| r[phase] == "bo"));

    let (th, trace) = read_csv(&a.join("trace.csv"));
    assert_eq!(th, ["iteration", "best_so_far", "proposal_wei"]);
    let best: Vec<f64> = trace.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(best.windows(2).all(|w| w[1] <= w[0]));
    let summary = std::fs::read_to_string(a.join("summary.txt")).unwrap();
    assert!(summary.contains("termination: budget exhausted"), "{summary}");
}

#[test]
fn override_sets_row_count() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quadratic(tmp.path(), 12);
    run_ok(&["run", "--config", cfg.to_str().unwrap(), "--override", "max_evals=30", "--override", "model.steps=60"]);
    let log = read_log(&tmp.path().join("out/log.csv")).unwrap();
    assert_eq!(log.rows.len(), 30);
    assert_eq!(log.rows.iter().map(|r| r.iteration).collect::<Vec<_>>(), (1..=30).collect::<Vec<_>>());
}

#[test]
fn seed_flag_changes_the_campaign() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quadratic(tmp.path(), 6);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    run_ok(&["run", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    run_ok(&["run", "--config", cfg.to_str().unwrap(), "--seed", "8", "--out", b.to_str().unwrap()]);
    let da = read_log(&a.join("log.csv")).unwrap().rows[0].design.clone();
    let db = read_log(&b.join("log.csv")).unwrap().rows[0].design.clone();
    assert_ne!(da, db);
    assert!(std::fs::read_to_string(b.join("config.toml")).unwrap().contains("seed = 8"));
}

#[test]
fn undeclared_metric_exits_2_naming_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "seed = 1\n[evaluator]\nkind = \"builtin\"\nname = \"toy2d\"\n[budget]\nn_init = 3\nmax_evals = 5\n[[constraints]]\nmetric = \"power\"\nop = \"<\"\nbound = 1.0\n";
    let cfg = write_config(tmp.path(), "bad.toml", text);
    let o = nnbo(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("constraints[0].metric") && err.contains("power"), "{err}");

    let o = nnbo(&["run", "--config", cfg.to_str().unwrap(), "--override", "budget.nope=3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope"));
}

#[test]
fn evaluator_fatal_exits_3_and_keeps_the_log() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!(
        "seed = 1\noutput_dir = \"{}\"\n[space]\nvariables = [{{ name = \"x\", lower = 0.0, upper = 1.0 }}]\n[evaluator]\nkind = \"external\"\ncommand = \"read line; exit 4\"\nmetrics = [\"f\"]\ntimeout_secs = 5.0\n[objective]\nmetric = \"f\"\n[budget]\nn_init = 3\nmax_evals = 10\nmax_consecutive_failures = 4\n",
        tmp.path().join("out").display()
    );
    let cfg = write_config(tmp.path(), "fail.toml", &text);
    let o = nnbo(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let log = read_log(&tmp.path().join("out/log.csv")).unwrap();
    assert_eq!(log.rows.len(), 4);
    assert!(log.rows.iter().all(|r| r.metrics.is_none() && r.failure_reason.is_some()));
}

#[test]
fn external_evaluator_campaign() {
    let tmp = tempfile::tempdir().unwrap();
    let script = "IFS=, read a b; awk -v a=$a -v b=$b 'BEGIN { printf \"%.17g,%.17g\\n\", (a-0.3)^2 + (b-0.6)^2, a + b }'";
    let text = format!(
        "seed = 2\noutput_dir = \"{}\"\n[space]\nvariables = [{{ name = \"a\", lower = 0.0, upper = 1.0 }}, {{ name = \"b\", lower = 0.0, upper = 1.0 }}]\n[evaluator]\nkind = \"external\"\ncommand = \"{}\"\nmetrics = [\"f\", \"s\"]\n[objective]\nmetric = \"f\"\n[[constraints]]\nmetric = \"s\"\nop = \"<\"\nbound = 1.2\n[budget]\nn_init = 5\nmax_evals = 9\n{FAST_MODEL}",
        tmp.path().join("out").display(),
        script.replace('\\', "\\\\").replace('"', "\\\"")
    );
    let cfg = write_config(tmp.path(), "ext.toml", &text);
    run_ok(&["run", "--config", cfg.to_str().unwrap()]);
    let log = read_log(&tmp.path().join("out/log.csv")).unwrap();
    assert_eq!(log.rows.len(), 9);
    for r in &log.rows {
        let m = r.metrics.as_ref().unwrap();
        let (a, b) = (r.design[0], r.design[1]);
        assert!((m[0] - ((a - 0.3).powi(2) + (b - 0.6).powi(2))).abs() < 1e-12);
        assert_eq!(r.feasible, a + b < 1.2);
    }
}

fn hand_log(path: &Path, finals: &[f64], metric: &str) {
    let mut w = csv::Writer::from_path(path).unwrap();
    w.write_record([
        "iteration", "phase", "var:x", &format!("metric:{metric}"), "objective", "direction", "feasible", "failed",
        "failure_reason", "wei", "timestamp",
    ])
    .unwrap();
    for (i, v) in finals.iter().enumerate() {
        let s = v.to_string();
        w.write_record([&(i + 1).to_string(), "init", "0.5", &s, &s, "minimize", "true", "false", "", "", "0.0"])
            .unwrap();
    }
    w.flush().unwrap();
}

#[test]
fn report_order_statistics() {
    let tmp = tempfile::tempdir().unwrap();
    let mut paths = Vec::new();
    for (i, v) in [2.0, 1.0, 3.0].iter().enumerate() {
        let p = tmp.path().join(format!("l{i}.csv"));
        hand_log(&p, &[v + 10.0, *v], "f");
        paths.push(p.to_str().unwrap().to_string());
    }
    let out = tmp.path().join("rep");
    let mut args = vec!["report"];
    args.extend(paths.iter().map(String::as_str));
    args.extend(["--out", out.to_str().unwrap()]);
    run_ok(&args);
    let (h, rows) = read_csv(&out.join("report.csv"));
    assert_eq!(h, ["row", "source", "objective", "f", "sims_to_feasible"]);
    let get = |label: &str| rows.iter().find(|r| r[0] == label).unwrap()[2].parse::<f64>().unwrap();
    assert_eq!((get("mean"), get("median"), get("best"), get("worst")), (2.0, 2.0, 1.0, 3.0));
    assert_eq!(get("successes"), 3.0);
    let (ch, conv) = read_csv(&out.join("convergence.csv"));
    assert_eq!(ch, ["iteration", "run1", "run2", "run3"]);
    assert_eq!(conv[0][1..], ["12", "11", "13"]);
    assert_eq!(conv[1][1..], ["2", "1", "3"]);
}

#[test]
fn report_of_identical_logs_is_flat() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("l.csv");
    hand_log(&p, &[4.0, 2.5, 3.0], "f");
    let ps = p.to_str().unwrap();
    let out = tmp.path().join("rep");
    let mut args = vec!["report"];
    args.extend([ps; 10]);
    args.extend(["--out", out.to_str().unwrap()]);
    run_ok(&args);
    let (_, rows) = read_csv(&out.join("report.csv"));
    for label in ["mean", "median", "best", "worst"] {
        assert_eq!(rows.iter().find(|r| r[0] == label).unwrap()[2], "2.5");
    }
}

#[test]
fn report_rejects_different_metric_sets() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a.csv");
    let b = tmp.path().join("b.csv");
    hand_log(&a, &[1.0], "f");
    hand_log(&b, &[1.0], "g");
    let o = nnbo(&["report", a.to_str().unwrap(), b.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

/// Report statistics against a direct recomputation on random logs.
#[test]
fn report_matches_brute_force() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(4);
    let tmp = tempfile::tempdir().unwrap();
    for round in 0..20 {
        let runs = rng.random_range(1..8);
        let mut logs = Vec::new();
        let mut finals = Vec::new();
        let mut firsts = Vec::new();
        for r in 0..runs {
            let n = rng.random_range(1..15);
            let path = tmp.path().join(format!("r{round}_{r}.csv"));
            let mut w = csv::Writer::from_path(&path).unwrap();
            w.write_record([
                "iteration", "phase", "var:x", "metric:f", "objective", "direction", "feasible", "failed",
                "failure_reason", "wei", "timestamp",
            ])
            .unwrap();
            let mut best: Option<f64> = None;
            let mut first = None;
            for i in 0..n {
                let failed = rng.random_bool(0.1);
                let feasible = !failed && rng.random_bool(0.4);
                let v: f64 = rng.random_range(-5.0..5.0);
                let val = if failed { String::new() } else { v.to_string() };
                w.write_record([
                    (i + 1).to_string().as_str(),
                    "bo",
                    "0.1",
                    &val,
                    &val,
                    "maximize",
                    &feasible.to_string(),
                    &failed.to_string(),
                    if failed { "exit-status" } else { "" },
                    "",
                    "0",
                ])
                .unwrap();
                if feasible {
                    best = Some(best.map_or(v, |b: f64| b.max(v)));
                    first.get_or_insert(i + 1);
                }
            }
            w.flush().unwrap();
            logs.push((path.display().to_string(), read_log(&path).unwrap()));
            finals.push(best);
            firsts.push(first);
        }
        let report = analyze(logs.clone()).unwrap();
        for ((src, log), f) in logs.iter().zip(&finals) {
            assert_eq!(summarize_run(src.clone(), log, Direction::Maximize).final_best, *f);
        }
        let mut ok: Vec<f64> = finals.iter().flatten().copied().collect();
        assert_eq!(report.successes, ok.len());
        if ok.is_empty() {
            assert!(report.mean.is_none());
            continue;
        }
        ok.sort_by(f64::total_cmp);
        let n = ok.len();
        let median = if n % 2 == 1 { ok[n / 2] } else { (ok[n / 2 - 1] + ok[n / 2]) / 2.0 };
        let mean = ok.iter().sum::<f64>() / n as f64;
        let sims: Vec<f64> = firsts.iter().flatten().map(|&s| s as f64).collect();
        assert!((report.mean.as_ref().unwrap().objective - mean).abs() < 1e-12);
        assert_eq!(report.median.as_ref().unwrap().objective, median);
        assert_eq!(report.best.as_ref().unwrap().objective, ok[n - 1]);
        assert_eq!(report.worst.as_ref().unwrap().objective, ok[0]);
        let avg_sims = sims.iter().sum::<f64>() / sims.len() as f64;
        assert!((report.mean.as_ref().unwrap().sims_to_feasible - avg_sims).abs() < 1e-12);
    }
}

#[test]
fn bench_scaling_is_stable_at_fixed_size() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!(
        "seed = 1\noutput_dir = \"{}\"\n[evaluator]\nkind = \"builtin\"\nname = \"coupled5d\"\n[budget]\nn_init = 4\nmax_evals = 8\n",
        tmp.path().display()
    );
    let cfg = write_config(tmp.path(), "b.toml", &text);
    run_ok(&["bench-scaling", "--config", cfg.to_str().unwrap(), "--sizes", "200,200", "--repeats", "3"]);
    let (h, rows) = read_csv(&tmp.path().join("timing.csv"));
    assert_eq!(h, ["n", "nn_seconds", "gp_seconds"]);
    let t: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    let ratio = t[1] / t[0];
    assert!((0.5..=2.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn list_builtins_names_every_fixture() {
    let o = nnbo(&["list-builtins"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for name in nnbo_core::evaluator::builtin_names() {
        assert!(text.contains(name));
    }
}

#[test]
fn shipped_configs_load_and_build() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = nnbo_cli::config::Config::load(&path, &[])
                .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            cfg.build().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 3);
}
