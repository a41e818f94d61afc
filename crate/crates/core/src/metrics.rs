//! Pixel-level segmentation scores. Plume is the positive class.

use crate::mask::PlumeMask;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("mask dimensions differ: {pred:?} vs {gt:?}")]
pub struct DimensionMismatch {
    pub pred: (u32, u32),
    pub gt: (u32, u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Roles of prediction and ground truth exchanged.
    pub fn transposed(&self) -> Self {
        Self {
            fp: self.fn_,
            fn_: self.fp,
            ..*self
        }
    }
}

impl std::ops::Add for ConfusionMatrix {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tn: self.tn + o.tn,
        }
    }
}

impl std::iter::Sum for ConfusionMatrix {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |a, b| a + b)
    }
}

pub fn confusion(pred: &PlumeMask, gt: &PlumeMask) -> Result<ConfusionMatrix, DimensionMismatch> {
    if (pred.width(), pred.height()) != (gt.width(), gt.height()) {
        return Err(DimensionMismatch {
            pred: (pred.width(), pred.height()),
            gt: (gt.width(), gt.height()),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &g) in pred.pixels().iter().zip(gt.pixels()) {
        match (p, g) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, true) => cm.fn_ += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

/// `None` marks a 0/0 ratio.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Scores {
    pub accuracy: Option<f64>,
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Harmonic mean of recall and precision; undefined when both are zero.
pub fn f1_score(recall: f64, precision: f64) -> Option<f64> {
    let s = recall + precision;
    (s > 0.0).then(|| 2.0 * recall * precision / s)
}

pub fn scores(cm: &ConfusionMatrix) -> Scores {
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    Scores {
        accuracy: ratio(cm.tp + cm.tn, cm.total()),
        recall,
        precision,
        f1: recall.zip(precision).and_then(|(r, p)| f1_score(r, p)),
    }
}

/// Per-image scores averaged (skipping undefined entries) and pooled.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BatchScores {
    pub macro_avg: Scores,
    pub micro: Scores,
    pub pooled: ConfusionMatrix,
}

pub fn batch_scores(matrices: &[ConfusionMatrix]) -> BatchScores {
    let per: Vec<Scores> = matrices.iter().map(scores).collect();
    let mean = |get: fn(&Scores) -> Option<f64>| {
        let vals: Vec<f64> = per.iter().filter_map(get).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };
    let pooled: ConfusionMatrix = matrices.iter().copied().sum();
    BatchScores {
        macro_avg: Scores {
            accuracy: mean(|s| s.accuracy),
            recall: mean(|s| s.recall),
            precision: mean(|s| s.precision),
            f1: mean(|s| s.f1),
        },
        micro: scores(&pooled),
        pooled,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn mask(w: u32, h: u32, on: &[usize]) -> PlumeMask {
        let mut px = vec![false; (w * h) as usize];
        for &i in on {
            px[i] = true;
        }
        PlumeMask::from_pixels(w, h, px)
    }

    #[test]
    fn identical_masks() {
        let m = mask(10, 10, &[1, 2, 3, 40, 41, 42, 99]);
        let cm = confusion(&m, &m).unwrap();
        assert_eq!(cm, ConfusionMatrix { tp: 7, fp: 0, fn_: 0, tn: 93 });
        let s = scores(&cm);
        assert_eq!((s.recall, s.precision, s.f1, s.accuracy), (Some(1.0), Some(1.0), Some(1.0), Some(1.0)));
    }

    #[test]
    fn all_negative_prediction() {
        let gt = mask(4, 4, &[0, 5, 6]);
        let cm = confusion(&PlumeMask::new(4, 4), &gt).unwrap();
        assert_eq!((cm.fn_, cm.tp), (3, 0));
        let s = scores(&cm);
        assert_eq!(s.precision, None);
        assert_eq!(s.recall, Some(0.0));
        assert_eq!(s.f1, None);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(confusion(&PlumeMask::new(3, 4), &PlumeMask::new(4, 3)).is_err());
    }

    #[test]
    fn f1_worked_value() {
        assert_relative_eq!(f1_score(0.846, 0.925).unwrap(), 0.883_738_001_129_305_5, epsilon = 1e-12);
        assert_eq!(f1_score(0.0, 0.0), None);
    }

    #[test]
    fn macro_skips_undefined_micro_pools() {
        let a = ConfusionMatrix { tp: 1, fp: 1, fn_: 0, tn: 2 };
        let b = ConfusionMatrix { tp: 0, fp: 0, fn_: 0, tn: 4 };
        let bs = batch_scores(&[a, b]);
        assert_eq!(bs.macro_avg.precision, Some(0.5));
        assert_eq!(bs.macro_avg.accuracy, Some((0.75 + 1.0) / 2.0));
        assert_eq!(bs.micro.accuracy, Some(7.0 / 8.0));
        assert_eq!(bs.pooled.total(), 8);
        assert_eq!(batch_scores(&[]).micro.accuracy, None);
    }

    fn arb_pair() -> impl Strategy<Value = (PlumeMask, PlumeMask)> {
        let px = || proptest::collection::vec(any::<bool>(), 64);
        (px(), px()).prop_map(|(a, b)| (PlumeMask::from_pixels(8, 8, a), PlumeMask::from_pixels(8, 8, b)))
    }

    proptest! {
        #[test]
        fn swap_exchanges_fp_fn((p, g) in arb_pair()) {
            let a = confusion(&p, &g).unwrap();
            let b = confusion(&g, &p).unwrap();
            prop_assert_eq!(a.transposed(), b);
            prop_assert_eq!(scores(&a).f1, scores(&b).f1);
            prop_assert_eq!(a.total(), 64);
        }

        #[test]
        fn f1_between_recall_and_precision((p, g) in arb_pair()) {
            let s = scores(&confusion(&p, &g).unwrap());
            if let (Some(r), Some(pr), Some(f)) = (s.recall, s.precision, s.f1) {
                prop_assert!(f <= r.max(pr) + 1e-15 && f >= r.min(pr) - 1e-15);
            }
        }
    }
}
