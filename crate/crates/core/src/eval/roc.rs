use serde::{Deserialize, Serialize};

use crate::corpus::ClassLabel;
use crate::error::{Error, Result};

/// One operating point: apps scoring at or above `threshold` are called
/// suspicious. The first point uses `+inf` (nothing flagged), the last `-inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    #[serde(with = "super::nonfinite")]
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// Threshold sweep over the distinct scores, highest first. Tied scores form
/// a single step, so the trapezoidal area equals the Mann-Whitney statistic
/// with ties counted one half.
pub fn roc(scored: &[(f64, ClassLabel)]) -> Result<RocCurve> {
    if scored.iter().any(|(s, _)| s.is_nan()) {
        return Err(Error::Invalid("ROC input contains a NaN score".into()));
    }
    let n_sus = scored.iter().filter(|(_, l)| *l == ClassLabel::Suspicious).count() as u64;
    let n_ben = scored.len() as u64 - n_sus;
    if n_ben == 0 {
        return Err(Error::EmptyClass("benign"));
    }
    if n_sus == 0 {
        return Err(Error::EmptyClass("suspicious"));
    }
    let mut sorted: Vec<(f64, ClassLabel)> = scored.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));

    let point = |threshold, fp: u64, tp: u64| RocPoint {
        threshold,
        fpr: fp as f64 / n_ben as f64,
        tpr: tp as f64 / n_sus as f64,
    };
    let mut points = vec![point(f64::INFINITY, 0, 0)];
    let (mut fp, mut tp) = (0u64, 0u64);
    // twice the area in units of one (benign, suspicious) cell
    let mut area2: u128 = 0;
    let mut i = 0;
    while i < sorted.len() {
        let score = sorted[i].0;
        let (prev_fp, prev_tp) = (fp, tp);
        while i < sorted.len() && sorted[i].0 == score {
            match sorted[i].1 {
                ClassLabel::Benign => fp += 1,
                ClassLabel::Suspicious => tp += 1,
            }
            i += 1;
        }
        area2 += (fp - prev_fp) as u128 * (tp + prev_tp) as u128;
        points.push(point(score, fp, tp));
    }
    points.push(point(f64::NEG_INFINITY, fp, tp));
    let auc = area2 as f64 / (2 * n_ben as u128 * n_sus as u128) as f64;
    Ok(RocCurve { points, auc })
}
