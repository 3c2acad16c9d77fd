use std::fmt;

use serde::{Deserialize, Serialize};

use crate::classifier::Prediction;
use crate::corpus::ClassLabel;
use crate::error::{Error, Result};

/// Cross-tabulation of ground truth against decisions. `n_bs` counts benign
/// apps classified suspicious, and so on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub n_bb: u64,
    pub n_bs: u64,
    pub n_sb: u64,
    pub n_ss: u64,
}

impl ConfusionCounts {
    pub fn new(n_bb: u64, n_bs: u64, n_sb: u64, n_ss: u64) -> Self {
        Self { n_bb, n_bs, n_sb, n_ss }
    }

    pub fn record(&mut self, truth: ClassLabel, decision: ClassLabel) {
        match (truth, decision) {
            (ClassLabel::Benign, ClassLabel::Benign) => self.n_bb += 1,
            (ClassLabel::Benign, ClassLabel::Suspicious) => self.n_bs += 1,
            (ClassLabel::Suspicious, ClassLabel::Benign) => self.n_sb += 1,
            (ClassLabel::Suspicious, ClassLabel::Suspicious) => self.n_ss += 1,
        }
    }

    pub fn benign(&self) -> u64 {
        self.n_bb + self.n_bs
    }

    pub fn suspicious(&self) -> u64 {
        self.n_sb + self.n_ss
    }

    pub fn total(&self) -> u64 {
        self.benign() + self.suspicious()
    }
}

/// Tabulate predictions against the matching ground-truth labels.
pub fn confusion(predictions: &[Prediction], labels: &[Option<ClassLabel>]) -> Result<ConfusionCounts> {
    if predictions.len() != labels.len() {
        return Err(Error::Invalid(format!(
            "{} predictions but {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let mut counts = ConfusionCounts::default();
    for (p, label) in predictions.iter().zip(labels) {
        let truth = label.ok_or_else(|| Error::Unlabeled(p.sample_id.clone()))?;
        counts.record(truth, p.decision);
    }
    Ok(counts)
}

/// Unreduced fraction; identities between rates sharing a denominator hold
/// exactly on the numerators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Self {
        debug_assert!(den > 0 && num <= den);
        Self { num, den }
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `1 - self`, exactly.
    pub fn complement(self) -> Self {
        Self::new(self.den - self.num, self.den)
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Accuracy, error and the four class-conditional rates, with suspicious as
/// the positive class. `precision` is `None` when nothing was predicted
/// suspicious.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricSet {
    pub acc: Ratio,
    pub err: Ratio,
    pub fpr: Ratio,
    pub fnr: Ratio,
    pub tpr: Ratio,
    pub tnr: Ratio,
    pub precision: Option<Ratio>,
}

pub fn metrics(c: &ConfusionCounts) -> Result<MetricSet> {
    if c.benign() == 0 {
        return Err(Error::EmptyClass("benign"));
    }
    if c.suspicious() == 0 {
        return Err(Error::EmptyClass("suspicious"));
    }
    let total = c.total();
    let predicted_sus = c.n_bs + c.n_ss;
    Ok(MetricSet {
        acc: Ratio::new(c.n_bb + c.n_ss, total),
        err: Ratio::new(c.n_bs + c.n_sb, total),
        fpr: Ratio::new(c.n_bs, c.benign()),
        fnr: Ratio::new(c.n_sb, c.suspicious()),
        tpr: Ratio::new(c.n_ss, c.suspicious()),
        tnr: Ratio::new(c.n_bb, c.benign()),
        precision: (predicted_sus > 0).then(|| Ratio::new(c.n_ss, predicted_sus)),
    })
}

/// Arithmetic means of per-fold metric values. Folds with undefined
/// precision are left out of the precision mean and counted separately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AveragedMetrics {
    pub acc: f64,
    pub err: f64,
    pub fpr: f64,
    pub fnr: f64,
    pub tpr: f64,
    pub tnr: f64,
    pub precision: Option<f64>,
    pub precision_undefined_folds: usize,
}

pub fn average(sets: &[MetricSet]) -> AveragedMetrics {
    let n = sets.len() as f64;
    let mean = |f: fn(&MetricSet) -> Ratio| sets.iter().map(|m| f(m).value()).sum::<f64>() / n;
    let defined: Vec<f64> = sets.iter().filter_map(|m| m.precision.map(Ratio::value)).collect();
    AveragedMetrics {
        acc: mean(|m| m.acc),
        err: mean(|m| m.err),
        fpr: mean(|m| m.fpr),
        fnr: mean(|m| m.fnr),
        tpr: mean(|m| m.tpr),
        tnr: mean(|m| m.tnr),
        precision: (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64),
        precision_undefined_folds: sets.len() - defined.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pred(id: &str, decision: ClassLabel) -> Prediction {
        Prediction {
            sample_id: id.into(),
            posterior: 0.5,
            score: 0.0,
            decision,
        }
    }

    #[test]
    fn tabulation() {
        use ClassLabel::*;
        let preds = [
            pred("a", Benign),
            pred("b", Benign),
            pred("c", Suspicious),
            pred("d", Suspicious),
        ];
        let truth = [Some(Benign), Some(Benign), Some(Suspicious), Some(Suspicious)];
        assert_eq!(confusion(&preds, &truth).unwrap(), ConfusionCounts::new(2, 0, 0, 2));
        let flipped: Vec<_> = truth.iter().map(|l| l.map(ClassLabel::flipped)).collect();
        assert_eq!(confusion(&preds, &flipped).unwrap(), ConfusionCounts::new(0, 2, 2, 0));
    }

    #[test]
    fn unlabeled_truth_is_an_error() {
        let err = confusion(&[pred("x", ClassLabel::Benign)], &[None]).unwrap_err();
        assert!(matches!(err, Error::Unlabeled(id) if id == "x"));
    }

    #[test]
    fn hand_case() {
        let m = metrics(&ConfusionCounts::new(190, 10, 18, 182)).unwrap();
        assert_eq!(m.acc.value(), 0.93);
        assert_eq!(m.err.value(), 0.07);
        assert_eq!(m.fpr.value(), 0.05);
        assert_eq!(m.tpr.value(), 0.91);
        assert_eq!(m.fnr.value(), 0.09);
        assert_eq!(m.tnr.value(), 0.95);
        assert_eq!(m.precision, Some(Ratio::new(182, 192)));
    }

    #[test]
    fn perfect_and_all_suspicious() {
        let m = metrics(&ConfusionCounts::new(7, 0, 0, 7)).unwrap();
        assert_eq!(
            (m.acc.value(), m.err.value(), m.fpr.value(), m.tpr.value()),
            (1.0, 0.0, 0.0, 1.0)
        );
        assert_eq!(m.precision.unwrap().value(), 1.0);
        let m = metrics(&ConfusionCounts::new(0, 7, 0, 7)).unwrap();
        assert_eq!((m.acc.value(), m.fpr.value(), m.tpr.value()), (0.5, 1.0, 1.0));
        assert_eq!(m.precision.unwrap().value(), 0.5);
    }

    #[test]
    fn precision_undefined_without_suspicious_predictions() {
        let m = metrics(&ConfusionCounts::new(5, 0, 5, 0)).unwrap();
        assert_eq!(m.precision, None);
        let avg = average(&[m, metrics(&ConfusionCounts::new(5, 0, 1, 4)).unwrap()]);
        assert_eq!(avg.precision, Some(1.0));
        assert_eq!(avg.precision_undefined_folds, 1);
        assert_eq!(avg.acc, (0.5 + 0.9) / 2.0);
    }

    #[test]
    fn empty_class_is_an_error() {
        assert!(matches!(
            metrics(&ConfusionCounts::new(0, 0, 3, 4)),
            Err(Error::EmptyClass("benign"))
        ));
        assert!(matches!(
            metrics(&ConfusionCounts::new(3, 4, 0, 0)),
            Err(Error::EmptyClass("suspicious"))
        ));
    }

    proptest! {
        #[test]
        fn identities_hold_exactly(n_bb in 0u64..10_000, n_bs in 0u64..10_000, n_sb in 0u64..10_000, n_ss in 0u64..10_000) {
            prop_assume!(n_bb + n_bs > 0 && n_sb + n_ss > 0);
            let m = metrics(&ConfusionCounts::new(n_bb, n_bs, n_sb, n_ss)).unwrap();
            prop_assert_eq!(m.acc.num + m.err.num, m.acc.den);
            prop_assert_eq!(m.acc.den, m.err.den);
            prop_assert_eq!(m.tpr.complement(), m.fnr);
            prop_assert_eq!(m.tnr.complement(), m.fpr);
            prop_assert!((m.acc.value() + m.err.value() - 1.0).abs() <= 1e-12);
        }
    }
}
