#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn nnbo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nnbo"))
        .args(args)
        .output()
        .expect("nnbo binary runs")
}

pub fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// Header and rows of a CSV file.
pub fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let h = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect();
    (h, rows)
}

pub fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

/// Quick surrogate settings for tests that only exercise plumbing.
pub const FAST_MODEL: &str = r#"
[model]
hidden1 = 16
hidden2 = 16
features = 8
ensemble_size = 2
steps = 150
warm_start = true
warm_start_steps = 40

[acquisition]
pool_size = 300
refine_top = 3
refine_rounds = 5
"#;
