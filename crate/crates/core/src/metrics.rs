//! Jaccard index, misclassification error and ROC analysis against a
//! ground-truth mask. Solid is the positive class.

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};
use crate::volume::{SaliencyField, SegmentationMask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// `TP / (TP + FP + FN)`, 1 when neither mask has any solid voxel.
    pub fn jaccard(&self) -> f64 {
        let union = self.tp + self.fp + self.fn_;
        if union == 0 {
            1.0
        } else {
            self.tp as f64 / union as f64
        }
    }

    pub fn misclassification(&self) -> f64 {
        (self.fp + self.fn_) as f64 / self.total() as f64
    }
}

pub fn confusion(pred: &SegmentationMask, truth: &SegmentationMask) -> Result<Confusion> {
    pred.dims().check_same(&truth.dims(), "confusion")?;
    let mut c = Confusion {
        tp: 0,
        fp: 0,
        tn: 0,
        fn_: 0,
    };
    for (&p, &t) in pred.solid().iter().zip(truth.solid()) {
        match (p, t) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

pub fn jaccard(pred: &SegmentationMask, truth: &SegmentationMask) -> Result<f64> {
    Ok(confusion(pred, truth)?.jaccard())
}

pub fn misclassification_error(pred: &SegmentationMask, truth: &SegmentationMask) -> Result<f64> {
    Ok(confusion(pred, truth)?.misclassification())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC curve over a uniform threshold grid on [0, 1].
///
/// A voxel is called solid at threshold `t` iff its score is `>= t`. Points
/// are ordered by descending threshold, preceded by `(0, 0)`, and end with
/// `(1, 1)` at `t = 0`.
pub fn roc_curve(
    score: &SaliencyField,
    truth: &SegmentationMask,
    n_thresholds: usize,
) -> Result<Vec<RocPoint>> {
    score.dims().check_same(&truth.dims(), "roc_curve")?;
    roc_curve_from_scores(score.values(), truth.solid(), n_thresholds)
}

pub fn roc_curve_from_scores(
    scores: &[f64],
    truth: &[bool],
    n_thresholds: usize,
) -> Result<Vec<RocPoint>> {
    if scores.len() != truth.len() {
        return arg_err(format!(
            "{} scores for {} labels",
            scores.len(),
            truth.len()
        ));
    }
    if n_thresholds < 2 {
        return arg_err("at least two thresholds are required");
    }
    let top = n_thresholds - 1;
    let level = |k: usize| k as f64 / top as f64;
    let mut pos = vec![0u64; n_thresholds];
    let mut neg = vec![0u64; n_thresholds];
    for (&s, &t) in scores.iter().zip(truth) {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Data(format!("score {s} outside [0, 1]")));
        }
        // Highest grid level not exceeding the score.
        let mut k = ((s * top as f64).floor() as usize).min(top);
        while k < top && level(k + 1) <= s {
            k += 1;
        }
        while k > 0 && level(k) > s {
            k -= 1;
        }
        if t {
            pos[k] += 1;
        } else {
            neg[k] += 1;
        }
    }
    let p_total: u64 = pos.iter().sum();
    let n_total: u64 = neg.iter().sum();
    if p_total == 0 || n_total == 0 {
        return Err(Error::UndefinedMetric(
            "ROC needs at least one solid and one pore voxel in the ground truth".to_string(),
        ));
    }
    let mut points = Vec::with_capacity(n_thresholds + 1);
    points.push(RocPoint { fpr: 0.0, tpr: 0.0 });
    let (mut tp, mut fp) = (0u64, 0u64);
    for k in (0..n_thresholds).rev() {
        tp += pos[k];
        fp += neg[k];
        points.push(RocPoint {
            fpr: fp as f64 / n_total as f64,
            tpr: tp as f64 / p_total as f64,
        });
    }
    Ok(points)
}

/// Trapezoidal area under an ROC curve ordered by non-decreasing FPR.
pub fn auroc(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * 0.5 * (w[1].tpr + w[0].tpr))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub iou: f64,
    pub me: f64,
    pub auroc: f64,
    pub roc_points: Vec<RocPoint>,
    pub counts: Confusion,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "volume,scales,iou,auroc,me,runtime_s";

    /// `volume,scales,iou,auroc,me,runtime_s`; scales are `;`-separated.
    pub fn csv_row(&self, volume_id: &str, scales: &[usize], runtime: Option<f64>) -> String {
        let scales: Vec<String> = scales.iter().map(|s| s.to_string()).collect();
        format!(
            "{},{},{:.6},{:.6},{:.6},{}",
            volume_id,
            scales.join(";"),
            self.iou,
            self.auroc,
            self.me,
            runtime.map(|r| format!("{r:.3}")).unwrap_or_default()
        )
    }
}

pub fn evaluate(
    pred: &SegmentationMask,
    field: &SaliencyField,
    truth: &SegmentationMask,
    n_thresholds: usize,
) -> Result<MetricsReport> {
    let counts = confusion(pred, truth)?;
    let roc_points = roc_curve(field, truth, n_thresholds)?;
    Ok(MetricsReport {
        iou: counts.jaccard(),
        me: counts.misclassification(),
        auroc: auroc(&roc_points),
        roc_points,
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Dims;

    fn mask(bits: &[u8]) -> SegmentationMask {
        SegmentationMask::new(
            Dims::new(bits.len(), 1, 1),
            bits.iter().map(|&b| b == 1).collect(),
        )
        .unwrap()
    }

    #[test]
    fn jaccard_cases() {
        let a = mask(&[1, 0, 1, 1]);
        assert_eq!(jaccard(&a, &a).unwrap(), 1.0);
        assert_eq!(jaccard(&mask(&[1, 1, 0, 0]), &mask(&[0, 0, 1, 1])).unwrap(), 0.0);
        // pred {a,b,c,d}, truth {c,d,e,f} over six voxels.
        let pred = mask(&[1, 1, 1, 1, 0, 0]);
        let truth = mask(&[0, 0, 1, 1, 1, 1]);
        assert!((jaccard(&pred, &truth).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let empty = mask(&[0, 0, 0]);
        assert_eq!(jaccard(&empty, &empty).unwrap(), 1.0);
        assert!(jaccard(&mask(&[1]), &mask(&[1, 0])).is_err());
    }

    #[test]
    fn me_cases() {
        let a = mask(&[1, 0, 1, 1, 0, 0, 1, 0]);
        assert_eq!(misclassification_error(&a, &a).unwrap(), 0.0);
        assert_eq!(misclassification_error(&a, &a.complement()).unwrap(), 1.0);
        let mut bits = vec![1, 0, 1, 1, 0, 0, 1, 0];
        bits[5] = 1;
        assert_eq!(misclassification_error(&mask(&bits), &a).unwrap(), 0.125);
    }

    fn field(v: &[f64]) -> SaliencyField {
        SaliencyField::new(Dims::new(v.len(), 1, 1), v.to_vec()).unwrap()
    }

    #[test]
    fn roc_perfect_inverse_constant() {
        let truth = mask(&[1, 0, 1, 0, 0]);
        let perfect = field(&[1.0, 0.0, 1.0, 0.0, 0.0]);
        let pts = roc_curve(&perfect, &truth, 256).unwrap();
        assert!(pts.contains(&RocPoint { fpr: 0.0, tpr: 1.0 }));
        assert_eq!(auroc(&pts), 1.0);
        assert_eq!(pts.first(), Some(&RocPoint { fpr: 0.0, tpr: 0.0 }));
        assert_eq!(pts.last(), Some(&RocPoint { fpr: 1.0, tpr: 1.0 }));

        let wrong = field(&[0.0, 1.0, 0.0, 1.0, 1.0]);
        assert_eq!(auroc(&roc_curve(&wrong, &truth, 256).unwrap()), 0.0);

        let flat = field(&[0.5; 5]);
        assert_eq!(auroc(&roc_curve(&flat, &truth, 256).unwrap()), 0.5);
    }

    #[test]
    fn roc_needs_both_classes() {
        let truth = mask(&[1, 1]);
        assert!(matches!(
            roc_curve(&field(&[0.2, 0.4]), &truth, 256),
            Err(Error::UndefinedMetric(_))
        ));
        assert!(roc_curve(&field(&[0.2, 0.4]), &mask(&[1, 0]), 1).is_err());
    }

    #[test]
    fn fpr_is_monotone() {
        let truth = mask(&[1, 0, 1, 0, 1, 0, 0]);
        let f = field(&[0.9, 0.1, 0.35, 0.4, 0.77, 0.5, 0.2]);
        let pts = roc_curve(&f, &truth, 16).unwrap();
        assert_eq!(pts.len(), 17);
        for w in pts.windows(2) {
            assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
        }
    }

    #[test]
    fn evaluate_perfect_and_inverted() {
        let truth = mask(&[1, 0, 0, 1]);
        let f = field(&[1.0, 0.0, 0.0, 1.0]);
        let r = evaluate(&truth, &f, &truth, 256).unwrap();
        assert_eq!((r.iou, r.me, r.auroc), (1.0, 0.0, 1.0));
        let r = evaluate(&truth.complement(), &f, &truth, 256).unwrap();
        assert_eq!((r.iou, r.me), (0.0, 1.0));
        assert_eq!(r.counts.total(), 4);
    }

    #[test]
    fn csv_row_format() {
        let truth = mask(&[1, 0]);
        let r = evaluate(&truth, &field(&[1.0, 0.0]), &truth, 4).unwrap();
        assert_eq!(
            r.csv_row("vol1", &[2000, 4000], Some(1.5)),
            "vol1,2000;4000,1.000000,1.000000,0.000000,1.500"
        );
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["counts"]["fn"], 0);
    }
}
