//! Charge pump with cascoded UP (PMOS, `M1`) and DOWN (NMOS, `M2`) current
//! sources, evaluated at 18 process/supply/temperature corners and reduced by
//! [`corner_aggregate`](super::corner_aggregate).
//!
//! Each source has 16 variables: reference device `Wr Lr`, mirror ratio `mult`
//! and output length `Lm` (output width follows from the ratio), cascode
//! `Wc Lc`, switch `Ws Ls`, dummy switch `Wd Ld`, cascode-bias device `Wb Lb`,
//! reference current `Iref`, bias current `Ib`, degeneration `Rdeg` and bias
//! decoupling `Cdec`. Four shared variables size the replica amplifier
//! (`Wa La Ia`) and the output filter `Cf`. Units: µm, µA, kΩ, pF.
//!
//! At each corner the output current is swept over the output window
//! `[0.2, VDD − 0.2]` V. The mean gives `I_avg`, the extremes give `I_min` and
//! `I_max`; switch charge injection and charge sharing add a glitch to `I_max`.
//! Mismatch between reference and output threshold (short-channel roll-off),
//! degeneration, cascode gain, cascode-bias headroom and switch resistance all
//! enter the current, so the 36 variables interact.

use super::corners::{corner_aggregate, CornerAggregate, CornerCurrents};
use crate::{Error, Result};

const BRANCH_NAMES: [&str; 16] = [
    "Wr", "Lr", "mult", "Lm", "Wc", "Lc", "Ws", "Ls", "Wd", "Ld", "Wb", "Lb", "Iref", "Ib", "Rdeg", "Cdec",
];
const BRANCH_LOWER: [f64; 16] = [
    0.2, 0.04, 0.9, 0.04, 0.2, 0.04, 0.2, 0.04, 0.2, 0.04, 0.2, 0.04, 35.0, 2.0, 0.0, 0.1,
];
const BRANCH_UPPER: [f64; 16] = [
    20.0, 1.0, 1.1, 1.0, 20.0, 1.0, 20.0, 1.0, 20.0, 1.0, 20.0, 1.0, 45.0, 40.0, 2.0, 5.0,
];
const SHARED_NAMES: [&str; 4] = ["Wa", "La", "Ia", "Cf"];
const SHARED_LOWER: [f64; 4] = [0.5, 0.04, 1.0, 0.1];
const SHARED_UPPER: [f64; 4] = [20.0, 1.0, 50.0, 10.0];

pub(crate) const DIM: usize = 36;

pub(crate) fn variable_names() -> Vec<String> {
    let mut out = Vec::with_capacity(DIM);
    for prefix in ["up", "dn"] {
        out.extend(BRANCH_NAMES.iter().map(|n| format!("{prefix}_{n}")));
    }
    out.extend(SHARED_NAMES.iter().map(|n| n.to_string()));
    out
}

pub(crate) fn bounds() -> Vec<(f64, f64)> {
    let branch = BRANCH_LOWER.iter().zip(&BRANCH_UPPER).map(|(&l, &u)| (l, u));
    branch
        .clone()
        .chain(branch)
        .chain(SHARED_LOWER.iter().zip(&SHARED_UPPER).map(|(&l, &u)| (l, u)))
        .collect()
}

/// One simulation condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChargePumpCorner {
    /// Multiplier on the process transconductance.
    pub k_scale: f64,
    /// Threshold shift, V.
    pub vth_shift: f64,
    pub vdd: f64,
    /// °C
    pub temperature: f64,
}

pub const CHARGEPUMP_CORNERS: usize = 18;

/// TT/FF/SS × {0.99, 1.21} V × {−40, 27, 125} °C.
pub fn chargepump_corners() -> Vec<ChargePumpCorner> {
    let mut out = Vec::with_capacity(CHARGEPUMP_CORNERS);
    for (k_scale, vth_shift) in [(1.0, 0.0), (1.2, -0.04), (0.82, 0.04)] {
        for vdd in [0.99, 1.21] {
            for temperature in [-40.0, 27.0, 125.0] {
                out.push(ChargePumpCorner { k_scale, vth_shift, vdd, temperature });
            }
        }
    }
    out
}

const THERMAL_VOLTAGE: f64 = 0.026;
const SLOPE_FACTOR: f64 = 1.3;
const SWEEP_POINTS: usize = 9;

fn softplus(x: f64) -> f64 {
    const S: f64 = 0.02;
    let t = x / S;
    if t > 30.0 {
        x
    } else {
        S * t.exp().ln_1p()
    }
}

fn overdrive(current: f64, aspect: f64, kp: f64) -> f64 {
    (2.0 * current / (kp * aspect)).sqrt()
}

fn transconductance(current: f64, aspect: f64, kp: f64) -> f64 {
    2.0 * current / (overdrive(current, aspect, kp) + 2.0 * SLOPE_FACTOR * THERMAL_VOLTAGE)
}

fn clm(length: f64) -> f64 {
    0.02 / length + 0.02
}

struct Device {
    kp0: f64,
    vth0: f64,
    pulls_up: bool,
}

const PMOS: Device = Device { kp0: 150e-6, vth0: 0.42, pulls_up: true };
const NMOS: Device = Device { kp0: 400e-6, vth0: 0.38, pulls_up: false };

fn threshold(dev: &Device, length: f64, c: &ChargePumpCorner) -> f64 {
    dev.vth0 + c.vth_shift - 0.001 * (c.temperature - 27.0) - 0.03 * (-length / 0.06).exp()
}

/// `[max, avg, min]` in µA for one source at one corner.
fn source_currents(p: &[f64], dev: &Device, amp_gain: f64, cf: f64, c: &ChargePumpCorner) -> [f64; 3] {
    let [wr, lr, mult, lm, wc, lc, ws, ls, wd, ld, wb, lb, iref, ib, rdeg, cdec] = [
        p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7], p[8], p[9], p[10], p[11], p[12], p[13], p[14], p[15],
    ];
    let wm = mult * wr * lm / lr;
    let kp = dev.kp0 * c.k_scale * ((c.temperature + 273.15) / 300.0).powf(-1.5);
    let iref = iref * 1e-6 * (1.0 + 0.03 * (c.k_scale - 1.0) + 0.0002 * (c.temperature - 27.0));

    let vgs = threshold(dev, lr, c) + overdrive(iref, wr / lr, kp);
    let ov_out = softplus(vgs - threshold(dev, lm, c));
    let i_nominal = 0.5 * kp * (wm / lm) * ov_out * ov_out;
    let gm_out = transconductance(i_nominal + 1e-9, wm / lm, kp);
    let r_deg = rdeg * 1e3;
    let i_ideal = iref * mult;
    let i0 = i_ideal + (i_nominal - i_ideal) / (1.0 + gm_out * r_deg);

    let cascode_gain = transconductance(i0, wc / lc, kp) / (clm(lc) * i0);
    let lambda_eff = clm(lm) / ((1.0 + cascode_gain) * (1.0 + gm_out * r_deg)) / (1.0 + amp_gain / 20.0);
    let r_switch = 1.0 / (kp * (ws / ls) * softplus(c.vdd - threshold(dev, ls, c) - 0.35) + 1e-12);
    let bias_margin = overdrive(ib * 1e-6, wb / lb, kp) - overdrive(i0, wc / lc, kp);
    let mirror = 1.0 - 0.15 / (1.0 + (bias_margin / 0.03).exp());
    let headroom = overdrive(i0, wm / lm, kp) + overdrive(i0, wc / lc, kp) + i0 * r_switch + i0 * r_deg;

    let (lo, hi) = (0.2, c.vdd - 0.2);
    let mut i_max = f64::NEG_INFINITY;
    let mut i_min = f64::INFINITY;
    let mut sum = 0.0;
    for s in 0..SWEEP_POINTS {
        let v_out = lo + (hi - lo) * s as f64 / (SWEEP_POINTS - 1) as f64;
        let vds = if dev.pulls_up { c.vdd - v_out } else { v_out };
        let i = 1e6 * i0 * mirror * (1.0 + lambda_eff * (vds - 0.5 * c.vdd)) * (2.0 * vds / headroom).tanh();
        i_max = i_max.max(i);
        i_min = i_min.min(i);
        sum += i;
    }
    let injected = (ws * ls - 0.5 * wd * ld).abs() * c.vdd;
    let glitch = 20.0 * injected / (cf * (1.0 + cdec)) + 0.3 * cf * ws * ls;
    [i_max + glitch, sum / SWEEP_POINTS as f64, i_min]
}

fn check_design(x: &[f64]) -> Result<()> {
    if x.len() != DIM {
        return Err(Error::DimensionMismatch { expected: DIM, got: x.len() });
    }
    for (i, (&v, (l, u))) in x.iter().zip(bounds()).enumerate() {
        if !(l..=u).contains(&v) {
            return Err(Error::OutOfBounds { index: i, value: v, lower: l, upper: u });
        }
    }
    Ok(())
}

/// Per-corner currents of both sources.
pub fn chargepump_corner_currents(x: &[f64]) -> Result<Vec<CornerCurrents>> {
    check_design(x)?;
    let (up, rest) = x.split_at(16);
    let (dn, shared) = rest.split_at(16);
    let [wa, la, ia, cf] = [shared[0], shared[1], shared[2], shared[3]];
    let ia = ia * 1e-6;
    let amp_gain = transconductance(ia, wa / la, NMOS.kp0) / (clm(la) * ia);
    Ok(chargepump_corners()
        .iter()
        .map(|c| CornerCurrents::new(source_currents(up, &PMOS, amp_gain, cf, c), source_currents(dn, &NMOS, amp_gain, cf, c)))
        .collect())
}

/// Aggregated metrics with the default 40 µA targets and 0.3/0.5 weights.
pub fn chargepump_metrics(x: &[f64]) -> Result<CornerAggregate> {
    corner_aggregate(&chargepump_corner_currents(x)?)
}
