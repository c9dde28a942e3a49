//! Static quantizers and their Krasovskii convexification.
//!
//! Levels are addressed by integer index. For the uniform quantizer level `k`
//! is `k * delta` and threshold `k` sits at `(k + 0.5) * delta`, between
//! levels `k` and `k + 1`. For a general quantizer the indices run over the
//! finite level list and threshold `k` separates `levels[k]` and
//! `levels[k + 1]`.
//!
//! An input lies *on* a threshold only when it is bit-identical to the value
//! returned by [`QuantizerSpec::threshold`]. The simulator snaps states to
//! exactly those values, so no epsilon test is ever needed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", try_from = "QuantizerWire")]
pub enum QuantizerSpec {
    Uniform { delta: f64 },
    General { levels: Vec<f64>, thresholds: Vec<f64> },
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum QuantizerWire {
    Uniform { delta: f64 },
    General { levels: Vec<f64>, thresholds: Vec<f64> },
}

impl TryFrom<QuantizerWire> for QuantizerSpec {
    type Error = Error;

    fn try_from(w: QuantizerWire) -> Result<Self> {
        match w {
            QuantizerWire::Uniform { delta } => QuantizerSpec::uniform(delta),
            QuantizerWire::General { levels, thresholds } => {
                QuantizerSpec::general(levels, thresholds)
            }
        }
    }
}

/// Where a scalar sits relative to the quantizer's discontinuities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Position {
    /// Strictly inside the cell whose level has this index.
    Cell(i64),
    /// Exactly on threshold `k`, between levels `k` and `k + 1`.
    Threshold(i64),
}

/// Closed range of level indices `lo..=hi`; used for Kq sets and their
/// intersections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelRange {
    pub lo: i64,
    pub hi: i64,
}

impl LevelRange {
    pub fn point(k: i64) -> Self {
        LevelRange { lo: k, hi: k }
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    pub fn intersect(&self, other: &LevelRange) -> LevelRange {
        LevelRange {
            lo: self.lo.max(other.lo),
            hi: self.hi.min(other.hi),
        }
    }

    pub fn contains(&self, k: i64) -> bool {
        self.lo <= k && k <= self.hi
    }
}

impl QuantizerSpec {
    pub fn uniform(delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidQuantizer(format!(
                "uniform precision must be positive and finite, got {delta}"
            )));
        }
        Ok(QuantizerSpec::Uniform { delta })
    }

    pub fn general(levels: Vec<f64>, thresholds: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidQuantizer("empty level list".into()));
        }
        if thresholds.len() + 1 != levels.len() {
            return Err(Error::InvalidQuantizer(format!(
                "{} levels need {} thresholds, got {}",
                levels.len(),
                levels.len() - 1,
                thresholds.len()
            )));
        }
        if levels.iter().chain(&thresholds).any(|v| !v.is_finite()) {
            return Err(Error::InvalidQuantizer("non-finite level or threshold".into()));
        }
        for (k, t) in thresholds.iter().enumerate() {
            if !(levels[k] < *t && *t < levels[k + 1]) {
                return Err(Error::InvalidQuantizer(format!(
                    "threshold {t} does not separate levels {} and {}",
                    levels[k],
                    levels[k + 1]
                )));
            }
        }
        Ok(QuantizerSpec::General { levels, thresholds })
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self, QuantizerSpec::Uniform { .. })
    }

    pub fn delta(&self) -> Option<f64> {
        match self {
            QuantizerSpec::Uniform { delta } => Some(*delta),
            QuantizerSpec::General { .. } => None,
        }
    }

    /// Smallest distance between consecutive levels.
    pub fn min_gap(&self) -> f64 {
        match self {
            QuantizerSpec::Uniform { delta } => *delta,
            QuantizerSpec::General { levels, .. } => levels
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn max_gap(&self) -> f64 {
        match self {
            QuantizerSpec::Uniform { delta } => *delta,
            QuantizerSpec::General { levels, .. } => {
                levels.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
            }
        }
    }

    pub fn level(&self, k: i64) -> f64 {
        match self {
            QuantizerSpec::Uniform { delta } => k as f64 * delta,
            QuantizerSpec::General { levels, .. } => {
                levels[k.clamp(0, levels.len() as i64 - 1) as usize]
            }
        }
    }

    /// Threshold `k` (between levels `k` and `k + 1`), if it exists.
    pub fn threshold(&self, k: i64) -> Option<f64> {
        match self {
            QuantizerSpec::Uniform { delta } => Some((k as f64 + 0.5) * delta),
            QuantizerSpec::General { thresholds, .. } => {
                usize::try_from(k).ok().and_then(|k| thresholds.get(k).copied())
            }
        }
    }

    /// Index of `q(z)`. At a threshold the upper level is returned.
    pub fn cell_index(&self, z: f64) -> i64 {
        match self {
            QuantizerSpec::Uniform { delta } => {
                let mut k = (z / delta + 0.5).floor() as i64;
                // Re-anchor on the stored threshold values so that the cell
                // boundaries agree bit-for-bit with `threshold`.
                while z < (k as f64 - 0.5) * delta {
                    k -= 1;
                }
                while z >= (k as f64 + 0.5) * delta {
                    k += 1;
                }
                k
            }
            QuantizerSpec::General { thresholds, .. } => {
                thresholds.partition_point(|t| *t <= z) as i64
            }
        }
    }

    pub fn position(&self, z: f64) -> Position {
        let k = self.cell_index(z);
        match self.threshold(k - 1) {
            Some(t) if t == z => Position::Threshold(k - 1),
            _ => Position::Cell(k),
        }
    }

    pub fn quantize(&self, z: f64) -> Result<f64> {
        if !z.is_finite() {
            return Err(Error::InvalidInput(format!("cannot quantize {z}")));
        }
        Ok(self.level(self.cell_index(z)))
    }

    /// Level indices of `Kq(z)`.
    pub fn krasovskii_range(&self, z: f64) -> LevelRange {
        match self.position(z) {
            Position::Cell(k) => LevelRange::point(k),
            Position::Threshold(k) => LevelRange { lo: k, hi: k + 1 },
        }
    }

    /// `Kq(z)` as a closed interval of values.
    pub fn krasovskii_set(&self, z: f64) -> (f64, f64) {
        let r = self.krasovskii_range(z);
        (self.level(r.lo), self.level(r.hi))
    }

    /// Nearest threshold strictly above (`direction > 0`) or strictly below
    /// `x`.
    pub fn next_threshold(&self, x: f64, direction: i8) -> Option<f64> {
        let k = self.cell_index(x);
        // threshold(k - 1) <= x < threshold(k)
        if direction > 0 {
            self.threshold(k)
        } else {
            match self.threshold(k - 1) {
                Some(t) if t < x => Some(t),
                Some(_) => self.threshold(k - 2),
                None => None,
            }
        }
    }

    /// Continuous approximation of `q`: equal to `q` outside the
    /// `eps`-neighbourhoods of thresholds, linear across them.
    pub fn smoothed(&self, x: f64, eps: f64) -> f64 {
        let k = self.cell_index(x);
        for j in [k - 1, k] {
            if let Some(t) = self.threshold(j) {
                if (x - t).abs() < eps {
                    let lo = self.level(j);
                    let hi = self.level(j + 1);
                    return 0.5 * (lo + hi) + (x - t) / (2.0 * eps) * (hi - lo);
                }
            }
        }
        self.level(k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit() -> QuantizerSpec {
        QuantizerSpec::uniform(1.0).unwrap()
    }

    fn general() -> QuantizerSpec {
        QuantizerSpec::general(vec![0.0, 1.0, 5.0], vec![0.5, 3.0]).unwrap()
    }

    #[test]
    fn uniform_quantize_examples() {
        let q = unit();
        assert_eq!(q.quantize(0.49).unwrap(), 0.0);
        assert_eq!(q.quantize(0.5).unwrap(), 1.0);
        let q = QuantizerSpec::uniform(0.5).unwrap();
        // floor(-0.24/0.5 + 0.5) = floor(0.02) = 0; floor(-0.25/0.5 + 0.5) = floor(0) = 0
        assert_eq!(q.quantize(-0.24).unwrap(), 0.0);
        assert_eq!(q.quantize(-0.25).unwrap(), 0.0);
        assert_eq!(q.quantize(-0.26).unwrap(), -0.5);
    }

    #[test]
    fn non_finite_is_rejected() {
        assert!(unit().quantize(f64::NAN).is_err());
        assert!(unit().quantize(f64::INFINITY).is_err());
    }

    #[test]
    fn krasovskii_examples() {
        assert_eq!(unit().krasovskii_set(0.2), (0.0, 0.0));
        assert_eq!(unit().krasovskii_set(0.5), (0.0, 1.0));
        assert_eq!(general().krasovskii_set(3.0), (1.0, 5.0));
        assert_eq!(general().krasovskii_set(7.0), (5.0, 5.0));
        assert_eq!(general().krasovskii_set(-9.0), (0.0, 0.0));
    }

    #[test]
    fn next_threshold_examples() {
        assert_eq!(unit().next_threshold(0.2, 1), Some(0.5));
        assert_eq!(unit().next_threshold(0.5, 1), Some(1.5));
        assert_eq!(unit().next_threshold(0.5, -1), Some(-0.5));
        assert_eq!(unit().next_threshold(0.7, -1), Some(0.5));
        assert_eq!(general().next_threshold(4.0, 1), None);
        assert_eq!(general().next_threshold(4.0, -1), Some(3.0));
        assert_eq!(general().next_threshold(0.5, -1), None);
        assert_eq!(general().next_threshold(0.5, 1), Some(3.0));
    }

    #[test]
    fn invalid_specs() {
        assert!(QuantizerSpec::uniform(0.0).is_err());
        assert!(QuantizerSpec::uniform(-1.0).is_err());
        assert!(QuantizerSpec::general(vec![0.0, 1.0], vec![]).is_err());
        assert!(QuantizerSpec::general(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(QuantizerSpec::general(vec![1.0, 0.0], vec![0.5]).is_err());
    }

    #[test]
    fn json_schema() {
        let q: QuantizerSpec = serde_json::from_str(r#"{"type":"uniform","delta":0.5}"#).unwrap();
        assert_eq!(q, QuantizerSpec::Uniform { delta: 0.5 });
        let g: QuantizerSpec =
            serde_json::from_str(r#"{"type":"general","levels":[0,1,5],"thresholds":[0.5,3]}"#)
                .unwrap();
        assert_eq!(g, general());
        assert!(serde_json::from_str::<QuantizerSpec>(r#"{"type":"uniform","delta":-1}"#).is_err());
        let back: QuantizerSpec = serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn smoothed_matches_q_away_from_thresholds() {
        let q = unit();
        assert_eq!(q.smoothed(0.2, 1e-3), 0.0);
        assert_eq!(q.smoothed(0.5, 1e-3), 0.5);
        assert!((q.smoothed(0.5 + 5e-4, 1e-3) - 0.75).abs() < 1e-12);
        assert_eq!(q.smoothed(1.6, 1e-3), 2.0);
    }

    proptest! {
        #[test]
        fn quantize_is_monotone(a in -1e3f64..1e3, b in -1e3f64..1e3, d in 0.01f64..10.0) {
            let q = QuantizerSpec::uniform(d).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(q.quantize(lo).unwrap() <= q.quantize(hi).unwrap());
            let g = general();
            prop_assert!(g.quantize(lo).unwrap() <= g.quantize(hi).unwrap());
        }

        #[test]
        fn uniform_error_is_at_most_half_delta(z in -1e4f64..1e4, d in 0.01f64..10.0) {
            let q = QuantizerSpec::uniform(d).unwrap();
            prop_assert!((q.quantize(z).unwrap() - z).abs() <= d / 2.0 * (1.0 + 1e-12));
        }

        #[test]
        fn kq_contains_value_and_one_sided_limits(k in -1000i64..1000, d in 0.01f64..10.0, off in 0.0f64..1.0) {
            let q = QuantizerSpec::uniform(d).unwrap();
            let t = q.threshold(k).unwrap();
            let (lo, hi) = q.krasovskii_set(t);
            let below = q.quantize(t - d * 1e-6).unwrap();
            let above = q.quantize(t + d * 1e-6).unwrap();
            prop_assert!(lo <= below && above <= hi);
            let z = t + off * d * 0.99;
            let (lo, hi) = q.krasovskii_set(z);
            let v = q.quantize(z).unwrap();
            prop_assert!(lo <= v && v <= hi);
        }

        #[test]
        fn thresholds_are_exact_fixed_points(k in -100000i64..100000, d in 0.001f64..100.0) {
            let q = QuantizerSpec::uniform(d).unwrap();
            let t = q.threshold(k).unwrap();
            prop_assert_eq!(q.position(t), Position::Threshold(k));
            prop_assert_eq!(q.cell_index(t), k + 1);
        }
    }
}
