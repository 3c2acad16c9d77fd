//! Stratified cross-validation, confusion-derived metrics, ROC analysis and
//! report files.

mod folds;
mod metrics;
mod report;
mod roc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::CatalogMode;
use crate::classifier::{train, Alpha, Prediction, TrainedModel};
use crate::corpus::ClassLabel;
use crate::error::{Error, Result};
use crate::matrix::VectorMatrix;
use crate::ranking::{build_contingency, rank_features, select_top, FeatureSelection, Preset};

pub use folds::{stratified_kfold, FoldAssignment};
pub use metrics::{average, confusion, metrics, AveragedMetrics, ConfusionCounts, MetricSet, Ratio};
pub use report::{emit_report, metrics_csv, roc_csv, roc_svg};
pub use roc::{roc, RocCurve, RocPoint};

pub const REPORT_SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub catalog_mode: CatalogMode,
    pub preset: Preset,
    pub alpha: Alpha,
    pub folds: usize,
    pub seed: u64,
    pub threshold: f64,
}

impl CvConfig {
    pub fn new(catalog_mode: CatalogMode, preset: Preset) -> Self {
        Self {
            catalog_mode,
            preset,
            alpha: Alpha::LAPLACE,
            folds: 5,
            seed: 0,
            threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSizes {
    pub benign: usize,
    pub suspicious: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub train: ClassSizes,
    pub test: ClassSizes,
    /// Features selected from this fold's training portion, by rank.
    pub features: Vec<String>,
    pub confusion: ConfusionCounts,
    pub metrics: MetricSet,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSample {
    pub fold: usize,
    pub sample_id: String,
    pub label: ClassLabel,
    pub posterior: f64,
    #[serde(with = "nonfinite")]
    pub score: f64,
    pub decision: ClassLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u64,
    pub config: CvConfig,
    /// Ranking is redone on each training portion.
    pub ranking: String,
    /// The ROC pools every fold's test scores into one curve.
    pub roc_aggregation: String,
    pub folds: Vec<FoldReport>,
    pub average: AveragedMetrics,
    pub roc: RocCurve,
    pub predictions: Vec<ScoredSample>,
}

impl EvalReport {
    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn labels_of(matrix: &VectorMatrix) -> Result<Vec<ClassLabel>> {
    matrix
        .rows
        .iter()
        .map(|r| r.label.ok_or_else(|| Error::Unlabeled(r.sample_id.clone())))
        .collect()
}

/// Rank on `train_rows` only, select the preset and fit the model.
pub fn fold_model(
    matrix: &VectorMatrix,
    train_rows: &[usize],
    config: &CvConfig,
) -> Result<(FeatureSelection, TrainedModel)> {
    let train_m = matrix.subset(train_rows);
    let ranked = rank_features(&build_contingency(&train_m)?);
    let selection = select_top(&ranked, config.preset)?;
    let model = train(&train_m, &selection, config.alpha, config.catalog_mode)?;
    Ok((selection, model))
}

struct FoldOutcome {
    report: FoldReport,
    scored: Vec<ScoredSample>,
}

fn run_fold(
    matrix: &VectorMatrix,
    labels: &[ClassLabel],
    assignment: &FoldAssignment,
    fold: usize,
    config: &CvConfig,
) -> Result<FoldOutcome> {
    let train_rows = assignment.train_indices(fold);
    let test_rows = assignment.test_indices(fold);
    let (selection, model) = fold_model(matrix, &train_rows, config)?;
    let projection = model.projection(&matrix.features)?;
    let predictions: Vec<Prediction> = test_rows
        .iter()
        .map(|&i| model.classify(&projection, &matrix.rows[i], config.threshold))
        .collect();
    let truth: Vec<Option<ClassLabel>> = test_rows.iter().map(|&i| Some(labels[i])).collect();
    let counts = confusion(&predictions, &truth)?;
    let sizes = |rows: &[usize]| {
        let sus = rows.iter().filter(|&&i| labels[i] == ClassLabel::Suspicious).count();
        ClassSizes {
            benign: rows.len() - sus,
            suspicious: sus,
        }
    };
    let scored: Vec<ScoredSample> = predictions
        .into_iter()
        .zip(&test_rows)
        .map(|(p, &i)| ScoredSample {
            fold,
            sample_id: p.sample_id,
            label: labels[i],
            posterior: p.posterior,
            score: p.score,
            decision: p.decision,
        })
        .collect();
    let fold_roc = roc(&scored.iter().map(|s| (s.score, s.label)).collect::<Vec<_>>())?;
    Ok(FoldOutcome {
        report: FoldReport {
            fold,
            train: sizes(&train_rows),
            test: sizes(&test_rows),
            features: selection.features,
            confusion: counts,
            metrics: metrics(&counts)?,
            auc: fold_roc.auc,
        },
        scored,
    })
}

/// k-fold evaluation of rank → select → train → classify. `jobs` bounds the
/// number of folds run at once (0 = all cores); the report does not depend
/// on it.
pub fn cross_validate(matrix: &VectorMatrix, config: &CvConfig, jobs: usize) -> Result<EvalReport> {
    let labels = labels_of(matrix)?;
    let ids: Vec<&str> = matrix.rows.iter().map(|r| r.sample_id.as_str()).collect();
    let assignment = stratified_kfold(&ids, &labels, config.folds, config.seed)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    let outcomes: Vec<FoldOutcome> = pool.install(|| {
        (0..config.folds)
            .into_par_iter()
            .map(|f| run_fold(matrix, &labels, &assignment, f, config))
            .collect::<Result<_>>()
    })?;

    let mut folds = Vec::with_capacity(outcomes.len());
    let mut predictions = Vec::new();
    for o in outcomes {
        folds.push(o.report);
        predictions.extend(o.scored);
    }
    let sets: Vec<MetricSet> = folds.iter().map(|f| f.metrics).collect();
    let pooled = roc(&predictions.iter().map(|s| (s.score, s.label)).collect::<Vec<_>>())?;
    Ok(EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config: *config,
        ranking: "per-fold".into(),
        roc_aggregation: "pooled".into(),
        folds,
        average: average(&sets),
        roc: pooled,
        predictions,
    })
}

/// Serde for `f64` that writes infinities and NaN as strings.
pub(crate) mod nonfinite {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("NaN")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "NaN" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("not a number: `{other}`"))),
            },
        }
    }
}
