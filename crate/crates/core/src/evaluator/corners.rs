//! Worst-case aggregation of charge-pump-style current measurements over
//! process/voltage/temperature corners.

use crate::{Error, Result};

/// Currents (µA) measured at one corner: `[max, avg, min]` for each source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerCurrents {
    pub m1: [f64; 3],
    pub m2: [f64; 3],
}

impl CornerCurrents {
    pub fn new(m1: [f64; 3], m2: [f64; 3]) -> Self {
        Self { m1, m2 }
    }

    /// From a row laid out `m1_max, m1_avg, m1_min, m2_max, m2_avg, m2_min`.
    pub fn from_row(row: &[f64]) -> Result<Self> {
        if row.len() != 6 {
            return Err(Error::DimensionMismatch { expected: 6, got: row.len() });
        }
        Ok(Self::new([row[0], row[1], row[2]], [row[3], row[4], row[5]]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateWeights {
    pub target_m1: f64,
    pub target_m2: f64,
    pub diff_weight: f64,
    pub deviation_weight: f64,
}

impl Default for AggregateWeights {
    /// 40 µA targets, `FOM = 0.3·diff + 0.5·deviation`.
    fn default() -> Self {
        Self {
            target_m1: 40.0,
            target_m2: 40.0,
            diff_weight: 0.3,
            deviation_weight: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerAggregate {
    /// `[diff1, diff2, diff3, diff4]`
    pub diffs: [f64; 4],
    pub diff: f64,
    pub deviation: f64,
    pub fom: f64,
}

pub fn fom(diff: f64, deviation: f64, w: &AggregateWeights) -> f64 {
    w.diff_weight * diff + w.deviation_weight * deviation
}

pub fn corner_aggregate(corners: &[CornerCurrents]) -> Result<CornerAggregate> {
    corner_aggregate_with(corners, &AggregateWeights::default())
}

pub fn corner_aggregate_with(corners: &[CornerCurrents], w: &AggregateWeights) -> Result<CornerAggregate> {
    if corners.is_empty() {
        return Err(Error::InvalidArgument("corner aggregation needs at least one corner".into()));
    }
    let mut diffs = [f64::NEG_INFINITY; 4];
    let mut dev1 = f64::NEG_INFINITY;
    let mut dev2 = f64::NEG_INFINITY;
    for (i, c) in corners.iter().enumerate() {
        if c.m1.iter().chain(&c.m2).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("corner {i} has a non-finite current")));
        }
        let [a_max, a_avg, a_min] = c.m1;
        let [b_max, b_avg, b_min] = c.m2;
        let row = [a_max - a_avg, a_avg - a_min, b_max - b_avg, b_avg - b_min];
        for (d, v) in diffs.iter_mut().zip(row) {
            *d = d.max(v);
        }
        dev1 = dev1.max((a_avg - w.target_m1).abs());
        dev2 = dev2.max((b_avg - w.target_m2).abs());
    }
    let diff = diffs.iter().sum();
    let deviation = dev1 + dev2;
    Ok(CornerAggregate {
        diffs,
        diff,
        deviation,
        fom: fom(diff, deviation, w),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn perfect_match() {
        let c = CornerCurrents::new([40.0; 3], [40.0; 3]);
        let a = corner_aggregate(&[c; 18]).unwrap();
        assert_eq!(a.diffs, [0.0; 4]);
        assert_eq!((a.deviation, a.fom), (0.0, 0.0));
    }

    #[test]
    fn single_corner_by_hand() {
        let a = corner_aggregate(&[CornerCurrents::new([45.0, 42.0, 40.0], [41.0, 40.0, 39.0])]).unwrap();
        assert_eq!(a.diffs, [3.0, 2.0, 1.0, 1.0]);
        assert_eq!(a.diff, 7.0);
        assert_eq!(a.deviation, 2.0);
        assert_relative_eq!(a.fom, 3.1, epsilon = 1e-12);
    }

    #[test]
    fn custom_weights() {
        let w = AggregateWeights { target_m1: 42.0, target_m2: 39.0, diff_weight: 1.0, deviation_weight: 2.0 };
        let a = corner_aggregate_with(&[CornerCurrents::new([45.0, 42.0, 40.0], [41.0, 40.0, 39.0])], &w).unwrap();
        assert_eq!(a.deviation, 1.0);
        assert_eq!(a.fom, 9.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(corner_aggregate(&[]).is_err());
        assert!(corner_aggregate(&[CornerCurrents::new([f64::NAN, 1.0, 1.0], [1.0; 3])]).is_err());
        assert!(CornerCurrents::from_row(&[1.0; 5]).is_err());
    }

    fn corner() -> impl Strategy<Value = CornerCurrents> {
        let ordered = || (0.0..100.0f64, 0.0..20.0f64, 0.0..20.0f64).prop_map(|(avg, up, down)| [avg + up, avg, avg - down]);
        (ordered(), ordered()).prop_map(|(a, b)| CornerCurrents::new(a, b))
    }

    proptest! {
        #[test]
        fn permutation_invariant(cs in proptest::collection::vec(corner(), 1..20), rot in 0usize..20) {
            let mut shuffled = cs.clone();
            shuffled.reverse();
            let k = rot % shuffled.len();
            shuffled.rotate_left(k);
            prop_assert_eq!(corner_aggregate(&cs).unwrap(), corner_aggregate(&shuffled).unwrap());
        }

        #[test]
        fn nonnegative_for_ordered_inputs(cs in proptest::collection::vec(corner(), 1..20)) {
            let a = corner_aggregate(&cs).unwrap();
            prop_assert!(a.diffs.iter().all(|&d| d >= 0.0));
            prop_assert!(a.diff >= 0.0 && a.deviation >= 0.0 && a.fom >= 0.0);
        }
    }
}
