//! Two-stage Miller-compensated amplifier described by long-channel device
//! equations.
//!
//! Design variables (µm, µA, pF): `W1 L1` input pair, `W3 L3` mirror load,
//! `W6 L6` second-stage driver, `I1` tail current, `I2` second-stage current,
//! `Cc` compensation capacitor, `L7` second-stage current-source length.
//!
//! Per device, `gm = 2I/(Vov + 2nVT)` with `Vov = sqrt(2I/(k'W/L))` (a smooth
//! bridge between weak and strong inversion) and `ro = 1/(λ(L)·I)` with
//! `λ(L) = 0.05/L + 0.02`. Then
//!
//! - `gain = 20·log10(gm1·(ro2‖ro4) · gm6·(ro6‖ro7))` in dB
//! - `ugf = gm1/(2π·Cc)` in MHz
//! - `pm = 90° − atan(ωu/p2) − atan(ωu/z) − atan(ωu/p3)` with the output pole
//!   `p2 = gm6·Cc/(C1C2 + Cc(C1+C2))`, right-half-plane zero `z = gm6/Cc` and
//!   mirror pole `p3 = gm3/(2·Cgs3)`; `C1` is the driver gate capacitance and
//!   `C2` a 1 pF load plus drain capacitance.

use crate::{Error, Result};
use std::f64::consts::PI;

pub(crate) const NAMES: [&str; 10] = ["W1", "L1", "W3", "L3", "W6", "L6", "I1", "I2", "Cc", "L7"];
pub(crate) const LOWER: [f64; 10] = [1.0, 0.18, 1.0, 0.18, 5.0, 0.18, 5.0, 20.0, 0.2, 0.18];
pub(crate) const UPPER: [f64; 10] = [100.0, 2.0, 100.0, 2.0, 400.0, 2.0, 200.0, 1000.0, 5.0, 2.0];

const KP_N: f64 = 300e-6;
const KP_P: f64 = 100e-6;
const THERMAL_VOLTAGE: f64 = 0.026;
const SLOPE_FACTOR: f64 = 1.3;
const COX: f64 = 8.5e-15; // F/µm²
const LOAD_CAP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpampMetrics {
    /// dB
    pub gain: f64,
    /// MHz
    pub ugf: f64,
    /// degrees
    pub pm: f64,
}

pub(crate) fn transconductance(current: f64, aspect: f64, kp: f64) -> f64 {
    let vov = (2.0 * current / (kp * aspect)).sqrt();
    2.0 * current / (vov + 2.0 * SLOPE_FACTOR * THERMAL_VOLTAGE)
}

fn clm(length_um: f64) -> f64 {
    0.05 / length_um + 0.02
}

/// Evaluates the amplifier at a design in physical units.
pub fn opamp_metrics(x: &[f64]) -> Result<OpampMetrics> {
    if x.len() != 10 {
        return Err(Error::DimensionMismatch { expected: 10, got: x.len() });
    }
    for (i, &v) in x.iter().enumerate() {
        if !(LOWER[i]..=UPPER[i]).contains(&v) {
            return Err(Error::OutOfBounds { index: i, value: v, lower: LOWER[i], upper: UPPER[i] });
        }
    }
    let [w1, l1, w3, l3, w6, l6, i1, i2, cc, l7] = [x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7], x[8], x[9]];
    let branch = 0.5 * i1 * 1e-6;
    let i2 = i2 * 1e-6;
    let cc = cc * 1e-12;

    let gm1 = transconductance(branch, w1 / l1, KP_N);
    let rout1 = 1.0 / (branch * (clm(l1) + clm(l3)));
    let gm6 = transconductance(i2, w6 / l6, KP_P);
    let rout2 = 1.0 / (i2 * (clm(l6) + clm(l7)));
    let gain = 20.0 * (gm1 * rout1 * gm6 * rout2).log10();

    let c1 = 2.0 / 3.0 * COX * w6 * l6 + 20e-15;
    let c2 = LOAD_CAP + 0.5e-15 * w6;
    let wu = gm1 / cc;
    let p2 = gm6 * cc / (c1 * c2 + cc * (c1 + c2));
    let zero = gm6 / cc;
    let gm3 = transconductance(branch, w3 / l3, KP_P);
    let p3 = gm3 / (2.0 * (2.0 / 3.0 * COX * w3 * l3) + 10e-15);
    let pm = 90.0 - ((wu / p2).atan() + (wu / zero).atan() + (wu / p3).atan()).to_degrees();

    Ok(OpampMetrics { gain, ugf: wu / (2.0 * PI) / 1e6, pm })
}
