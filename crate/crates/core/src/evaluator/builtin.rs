//! Builtin analytic problems with stored reference optima.

use super::chargepump::{self, chargepump_metrics};
use super::opamp::{self, opamp_metrics};
use super::{EvalFailure, Evaluator};
use crate::design_space::DesignSpace;
use crate::problem::{Constraint, ConstraintOp, Direction, Objective, Problem};
use crate::Result;
use std::f64::consts::PI;

/// Best known design of a builtin problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    /// Physical units.
    pub design: Vec<f64>,
    /// Objective value in its declared direction.
    pub objective: f64,
    /// How the reference was established.
    pub provenance: &'static str,
}

type MetricFn = fn(&[f64]) -> Result<Vec<f64>>;

pub struct Builtin {
    pub name: &'static str,
    pub description: &'static str,
    pub problem: Problem,
    pub reference: Reference,
    func: MetricFn,
}

impl std::fmt::Debug for Builtin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Builtin").field("name", &self.name).field("problem", &self.problem).finish()
    }
}

impl Builtin {
    pub fn metrics_at(&self, design: &[f64]) -> Result<Vec<f64>> {
        (self.func)(design)
    }
}

impl Evaluator for Builtin {
    fn metric_names(&self) -> &[String] {
        &self.problem.metrics
    }

    fn evaluate(&self, design: &[f64]) -> std::result::Result<Vec<f64>, EvalFailure> {
        (self.func)(design).map_err(|e| EvalFailure::Domain(e.to_string()))
    }
}

fn check(x: &[f64], lower: &[f64], upper: &[f64]) -> Result<()> {
    if x.len() != lower.len() {
        return Err(crate::Error::DimensionMismatch { expected: lower.len(), got: x.len() });
    }
    for (i, &v) in x.iter().enumerate() {
        if !(lower[i]..=upper[i]).contains(&v) {
            return Err(crate::Error::OutOfBounds { index: i, value: v, lower: lower[i], upper: upper[i] });
        }
    }
    Ok(())
}

fn quadratic1d(x: &[f64]) -> Result<Vec<f64>> {
    check(x, &[-2.0], &[2.0])?;
    Ok(vec![(x[0] - 0.7).powi(2)])
}

/// Linear objective with a wiggly and a circular constraint on the unit square.
fn toy2d(x: &[f64]) -> Result<Vec<f64>> {
    check(x, &[0.0; 2], &[1.0; 2])?;
    let (a, b) = (x[0], x[1]);
    let c1 = 1.5 - a - 2.0 * b - 0.5 * (2.0 * PI * (a * a - 2.0 * b)).sin();
    let c2 = a * a + b * b - 1.5;
    Ok(vec![a + b, c1, c2])
}

/// Shifted bowl with an oscillating interaction term, a lower bound on the
/// coordinate sum and an upper bound on a bilinear coupling.
fn coupled5d(x: &[f64]) -> Result<Vec<f64>> {
    check(x, &[0.0; 5], &[1.0; 5])?;
    let bowl: f64 = x.iter().map(|v| (v - 0.25).powi(2)).sum();
    let f = bowl + 0.2 * (3.0 * x[0] + 2.0 * x[1]).sin() * (x[2] - x[3] + x[4]).cos();
    let sum: f64 = x.iter().sum();
    let coupling = x[0] * x[1] + x[2] * x[4];
    Ok(vec![f, sum, coupling])
}

fn opamp10(x: &[f64]) -> Result<Vec<f64>> {
    let m = opamp_metrics(x)?;
    Ok(vec![m.gain, m.ugf, m.pm])
}

fn chargepump36(x: &[f64]) -> Result<Vec<f64>> {
    let a = chargepump_metrics(x)?;
    Ok(vec![a.fom, a.diffs[0], a.diffs[1], a.diffs[2], a.diffs[3], a.deviation])
}

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

#[allow(clippy::too_many_arguments)]
fn make(
    name: &'static str,
    description: &'static str,
    space: DesignSpace,
    metrics: &[&str],
    objective: Objective,
    constraints: Vec<Constraint>,
    reference: Reference,
    func: MetricFn,
) -> Builtin {
    let problem = Problem::new(space, names(metrics), objective, constraints).expect("builtin problem is well formed");
    Builtin { name, description, problem, reference, func }
}

const BUILTINS: [&str; 5] = ["quadratic1d", "toy2d", "coupled5d", "opamp10", "chargepump36"];

pub fn builtin_names() -> &'static [&'static str] {
    &BUILTINS
}

pub fn builtin(name: &str) -> Option<Builtin> {
    use ConstraintOp::{Greater, Less};
    let unit = |d: usize| DesignSpace::from_bounds((1..=d).map(|i| (format!("x{i}"), 0.0, 1.0))).expect("unit box");
    Some(match name {
        "quadratic1d" => make(
            "quadratic1d",
            "(x - 0.7)^2 on [-2, 2], unconstrained",
            DesignSpace::new(names(&["x"]), vec![-2.0], vec![2.0]).expect("valid"),
            &["f"],
            Objective::new("f", Direction::Minimize),
            vec![],
            Reference { design: vec![0.7], objective: 0.0, provenance: "closed form" },
            quadratic1d,
        ),
        "toy2d" => make(
            "toy2d",
            "minimize x1 + x2 subject to a sinusoidal and a circular constraint on [0,1]^2",
            unit(2),
            &["f", "c1", "c2"],
            Objective::new("f", Direction::Minimize),
            vec![Constraint::new("c1", Less, 0.0), Constraint::new("c2", Less, 0.0)],
            reference(&TOY2D_DESIGN, TOY2D_OBJECTIVE, "201x201 lattice plus coordinate refinement"),
            toy2d,
        ),
        "coupled5d" => make(
            "coupled5d",
            "oscillating bowl on [0,1]^5 with sum > 2.2 and coupling < 0.4",
            unit(5),
            &["f", "sum", "coupling"],
            Objective::new("f", Direction::Minimize),
            vec![Constraint::new("sum", Greater, 2.2), Constraint::new("coupling", Less, 0.4)],
            reference(&COUPLED5D_DESIGN, COUPLED5D_OBJECTIVE, "21^5 lattice plus coordinate refinement"),
            coupled5d,
        ),
        "opamp10" => make(
            "opamp10",
            "two-stage amplifier: maximize gain (dB) subject to ugf > 40 MHz and pm > 60 deg",
            DesignSpace::new(names(&opamp::NAMES), opamp::LOWER.to_vec(), opamp::UPPER.to_vec()).expect("valid"),
            &["gain", "ugf", "pm"],
            Objective::new("gain", Direction::Maximize),
            vec![Constraint::new("ugf", Greater, 40.0), Constraint::new("pm", Greater, 60.0)],
            reference(
                &OPAMP10_DESIGN,
                OPAMP10_OBJECTIVE,
                "5^10 lattice, coordinate refinement and a constrained quasi-Newton polish",
            ),
            opamp10,
        ),
        "chargepump36" => {
            let b = chargepump::bounds();
            make(
                "chargepump36",
                "charge pump over 18 corners: minimize FOM = 0.3 diff + 0.5 deviation",
                DesignSpace::new(
                    chargepump::variable_names(),
                    b.iter().map(|p| p.0).collect(),
                    b.iter().map(|p| p.1).collect(),
                )
                .expect("valid"),
                &["fom", "diff1", "diff2", "diff3", "diff4", "deviation"],
                Objective::new("fom", Direction::Minimize),
                vec![
                    Constraint::new("diff1", Less, 20.0),
                    Constraint::new("diff2", Less, 20.0),
                    Constraint::new("diff3", Less, 5.0),
                    Constraint::new("diff4", Less, 5.0),
                    Constraint::new("deviation", Less, 5.0),
                ],
                reference(
                    &CHARGEPUMP36_DESIGN,
                    CHARGEPUMP36_OBJECTIVE,
                    "best of 200000 Latin hypercube points after coordinate refinement",
                ),
                chargepump36,
            )
        }
        _ => return None,
    })
}

/// Constrained problems from 2 to 36 dimensions.
pub fn builtin_constrained_suite() -> Vec<Builtin> {
    ["toy2d", "coupled5d", "opamp10", "chargepump36"]
        .iter()
        .map(|n| builtin(n).expect("registered"))
        .collect()
}

/// Result of a brute-force search.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub design: Vec<f64>,
    pub objective: f64,
    pub evaluations: usize,
}

/// Scores every candidate (unit-cube coordinates), then polishes the best
/// `refine_top` feasible ones by feasibility-preserving coordinate search.
/// Returns `None` when no candidate is feasible.
pub fn certify_optimum(
    b: &Builtin,
    candidates: impl IntoIterator<Item = Vec<f64>>,
    initial_step: f64,
    refine_top: usize,
) -> Option<Certificate> {
    let space = &b.problem.space;
    let mut evaluations = 0usize;
    let mut score = |u: &[f64]| -> Option<f64> {
        evaluations += 1;
        let x = space.denormalize(u).ok()?;
        let raw = b.metrics_at(&x.0).ok()?;
        let ing = b.problem.ingest(&raw).ok()?;
        ing.feasible().then_some(ing.objective)
    };

    let mut top: Vec<(f64, Vec<f64>)> = Vec::new();
    for u in candidates {
        if let Some(v) = score(&u) {
            if top.len() < refine_top || v < top[top.len() - 1].0 {
                let pos = top.partition_point(|(w, _)| *w <= v);
                top.insert(pos, (v, u));
                top.truncate(refine_top.max(1));
            }
        }
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    for (mut v, mut u) in top {
        let mut step = initial_step;
        while step > 1e-9 {
            let mut improved = false;
            for i in 0..u.len() {
                for dir in [1.0, -1.0] {
                    let old = u[i];
                    u[i] = (old + dir * step).clamp(0.0, 1.0);
                    match score(&u) {
                        Some(w) if w < v => {
                            v = w;
                            improved = true;
                            break;
                        }
                        _ => u[i] = old,
                    }
                }
            }
            if !improved {
                // Slide along active constraints by trading two coordinates.
                'pairs: for i in 0..u.len() {
                    for j in i + 1..u.len() {
                        for dir in [1.0, -1.0] {
                            let (oi, oj) = (u[i], u[j]);
                            u[i] = (oi + dir * step).clamp(0.0, 1.0);
                            u[j] = (oj - dir * step).clamp(0.0, 1.0);
                            match score(&u) {
                                Some(w) if w < v => {
                                    v = w;
                                    improved = true;
                                    break 'pairs;
                                }
                                _ => (u[i], u[j]) = (oi, oj),
                            }
                        }
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
            best = Some((v, u));
        }
    }
    best.map(|(v, u)| Certificate {
        design: space.denormalize(&u).expect("unit point").0,
        objective: b.problem.objective.to_min(v),
        evaluations,
    })
}

/// Every point of a `levels^dim` grid on the unit cube.
pub fn lattice(dim: usize, levels: usize) -> impl Iterator<Item = Vec<f64>> {
    let total = levels.checked_pow(dim as u32).expect("lattice size overflows");
    let step = 1.0 / (levels.max(2) - 1) as f64;
    (0..total).map(move |mut k| {
        (0..dim)
            .map(|_| {
                let i = k % levels;
                k /= levels;
                i as f64 * step
            })
            .collect()
    })
}

fn reference(design: &[f64], objective: f64, provenance: &'static str) -> Reference {
    Reference { design: design.to_vec(), objective, provenance }
}

const TOY2D_DESIGN: [f64; 2] = [0.1947933626174927, 0.405];
const TOY2D_OBJECTIVE: f64 = 0.5997933626174927;

const COUPLED5D_DESIGN: [f64; 5] = [
    0.5798183217644708,
    0.4909121960401533,
    0.3396470382809643,
    0.44997539520263674,
    0.3396470487117771,
];
const COUPLED5D_OBJECTIVE: f64 = 0.3023550454278021;

const OPAMP10_DESIGN: [f64; 10] = [
    100.0,
    2.0,
    1.0,
    1.7416296867083643,
    400.0,
    0.5046618562497122,
    24.675534455703104,
    297.6257886820897,
    0.907744580637144,
    2.0,
];
const OPAMP10_OBJECTIVE: f64 = 83.85833997418176;

const CHARGEPUMP36_DESIGN: [f64; 36] = [
    20.0, 0.19890992151783532, 1.1, 0.3880761425121995, 20.0, 0.04, 11.952719398109117, 0.04,
    10.583771533292909, 0.09034752388758338, 4.46518539762489, 0.9845273675918574, 36.64199858818943,
    36.81245836615564, 0.0, 5.0, 11.478665530122198, 0.42262772088630446, 1.0258013179503909, 1.0,
    19.710912232128532, 0.157863874990667, 5.7217676140354525, 0.04, 4.1700387180242044, 0.10976910304362106,
    19.999619866609574, 0.04, 43.87648323590174, 2.0, 0.0, 5.0, 20.0, 1.0, 1.0, 0.1,
];
const CHARGEPUMP36_OBJECTIVE: f64 = 1.0493678973856866;
