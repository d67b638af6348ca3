//! Plain-text dump of a surrogate's hyperparameters for debugging.
//!
//! ```text
//! nnbo-surrogate 1
//! architecture <d> <H1> <H2> <M>
//! log_sigma_n <value>
//! log_sigma_p <value>
//! target <mean> <scale>
//! layer <index> <rows> <cols>
//! weight <rows·cols values, row-major>
//! bias <rows values>
//! ```
//!
//! Values use shortest round-trip formatting, so parsing is lossless.

use super::network::{Architecture, NetworkWeights};
use super::surrogate::Theta;
use crate::stats::Standardizer;
use crate::{Error, Result};
use std::fmt::Write as _;

const MAGIC: &str = "nnbo-surrogate 1";

fn join(values: impl Iterator<Item = f64>) -> String {
    values.map(|v| format!("{v:?}")).collect::<Vec<_>>().join(" ")
}

pub fn write_surrogate_text(theta: &Theta, target: Standardizer) -> String {
    let a = theta.architecture();
    let mut s = String::new();
    writeln!(s, "{MAGIC}").unwrap();
    writeln!(s, "architecture {} {} {} {}", a.input_dim, a.hidden1, a.hidden2, a.features).unwrap();
    writeln!(s, "log_sigma_n {:?}", theta.log_sigma_n).unwrap();
    writeln!(s, "log_sigma_p {:?}", theta.log_sigma_p).unwrap();
    writeln!(s, "target {:?} {:?}", target.mean, target.scale).unwrap();
    for (i, layer) in theta.weights.layers().iter().enumerate() {
        let (rows, cols) = layer.weight.shape();
        writeln!(s, "layer {} {rows} {cols}", i + 1).unwrap();
        let row_major = (0..rows).flat_map(|r| (0..cols).map(move |c| (r, c)));
        writeln!(s, "weight {}", join(row_major.map(|rc| layer.weight[rc]))).unwrap();
        writeln!(s, "bias {}", join(layer.bias.iter().copied())).unwrap();
    }
    s
}

fn parse_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("line {line}: {msg}"))
}

fn fields<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>, key: &str) -> Result<(usize, Vec<&'a str>)> {
    let (no, line) = lines.next().ok_or_else(|| Error::Parse(format!("missing '{key}' line")))?;
    let mut it = line.split_whitespace();
    match it.next() {
        Some(k) if k == key => Ok((no, it.collect())),
        other => Err(parse_err(no, format!("expected '{key}', found {other:?}"))),
    }
}

fn numbers<T: std::str::FromStr>(no: usize, raw: &[&str]) -> Result<Vec<T>> {
    raw.iter()
        .map(|t| t.parse::<T>().map_err(|_| parse_err(no, format!("bad number '{t}'"))))
        .collect()
}

fn one_f64(no: usize, raw: &[&str]) -> Result<f64> {
    match numbers::<f64>(no, raw)?.as_slice() {
        [v] => Ok(*v),
        _ => Err(parse_err(no, "expected one value")),
    }
}

pub fn read_surrogate_text(text: &str) -> Result<(Theta, Standardizer)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    match lines.next() {
        Some((_, l)) if l == MAGIC => {}
        _ => return Err(Error::Parse(format!("missing '{MAGIC}' header"))),
    }
    let (no, raw) = fields(&mut lines, "architecture")?;
    let dims: Vec<usize> = numbers(no, &raw)?;
    let [input_dim, hidden1, hidden2, features] = dims[..] else {
        return Err(parse_err(no, "architecture needs four sizes"));
    };
    let arch = Architecture {
        input_dim,
        hidden1,
        hidden2,
        features,
    };
    let (no, raw) = fields(&mut lines, "log_sigma_n")?;
    let log_sigma_n = one_f64(no, &raw)?;
    let (no, raw) = fields(&mut lines, "log_sigma_p")?;
    let log_sigma_p = one_f64(no, &raw)?;
    let (no, raw) = fields(&mut lines, "target")?;
    let t: Vec<f64> = numbers(no, &raw)?;
    let [mean, scale] = t[..] else {
        return Err(parse_err(no, "target needs mean and scale"));
    };

    let mut weights = NetworkWeights::zeros(arch)?;
    for (i, layer) in weights.layers_mut().iter_mut().enumerate() {
        let (no, raw) = fields(&mut lines, "layer")?;
        let header: Vec<usize> = numbers(no, &raw)?;
        let (rows, cols) = layer.weight.shape();
        if header != [i + 1, rows, cols] {
            return Err(parse_err(no, format!("expected layer {} {rows} {cols}", i + 1)));
        }
        let (no, raw) = fields(&mut lines, "weight")?;
        let w: Vec<f64> = numbers(no, &raw)?;
        if w.len() != rows * cols {
            return Err(parse_err(no, format!("expected {} weights", rows * cols)));
        }
        for r in 0..rows {
            for c in 0..cols {
                layer.weight[(r, c)] = w[r * cols + c];
            }
        }
        let (no, raw) = fields(&mut lines, "bias")?;
        let b: Vec<f64> = numbers(no, &raw)?;
        if b.len() != rows {
            return Err(parse_err(no, format!("expected {rows} biases")));
        }
        layer.bias.copy_from_slice(&b);
    }
    if let Some((no, _)) = lines.next() {
        return Err(parse_err(no, "trailing content"));
    }
    Ok((
        Theta {
            log_sigma_n,
            log_sigma_p,
            weights,
        },
        Standardizer { mean, scale },
    ))
}
