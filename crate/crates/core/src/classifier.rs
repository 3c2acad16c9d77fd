//! Bernoulli naive Bayes over binary feature vectors.
//!
//! The model keeps integer counts and an exact rational smoothing constant;
//! every probability is derived from them on load, so a saved model
//! reproduces posteriors bit for bit.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::catalog::CatalogMode;
use crate::corpus::ClassLabel;
use crate::error::{Error, Result};
use crate::matrix::{FeatureVector, VectorMatrix};
use crate::ranking::FeatureSelection;

pub const MODEL_SCHEMA_VERSION: u64 = 1;

/// Additive smoothing constant stored as an exact fraction `num / den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Alpha {
    pub num: u64,
    pub den: u64,
}

impl Alpha {
    pub const LAPLACE: Alpha = Alpha { num: 1, den: 1 };
    pub const ZERO: Alpha = Alpha { num: 0, den: 1 };

    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 {
            return Err(Error::Invalid("alpha denominator must be positive".into()));
        }
        Ok(Self { num, den })
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl Default for Alpha {
    fn default() -> Self {
        Alpha::LAPLACE
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

/// Accepts plain decimals (`1`, `0.5`, `0.001`) and fractions (`1/3`).
impl FromStr for Alpha {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Invalid(format!("invalid smoothing constant `{s}`"));
        if let Some((n, d)) = s.split_once('/') {
            return Alpha::new(
                n.trim().parse().map_err(|_| bad())?,
                d.trim().parse().map_err(|_| bad())?,
            );
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if int.is_empty() && frac.is_empty() {
            return Err(bad());
        }
        if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) || frac.len() > 18 {
            return Err(bad());
        }
        let den = 10u64.pow(frac.len() as u32);
        let int: u64 = if int.is_empty() {
            0
        } else {
            int.parse().map_err(|_| bad())?
        };
        let frac_v: u64 = if frac.is_empty() {
            0
        } else {
            frac.parse().map_err(|_| bad())?
        };
        let num = int
            .checked_mul(den)
            .and_then(|v| v.checked_add(frac_v))
            .ok_or_else(bad)?;
        Ok(Alpha { num, den })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelFeature {
    pub name: String,
    pub count_pos_sus: u64,
    pub count_pos_ben: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub benign: u64,
    pub suspicious: u64,
}

impl ClassCounts {
    pub fn get(&self, class: ClassLabel) -> u64 {
        match class {
            ClassLabel::Benign => self.benign,
            ClassLabel::Suspicious => self.suspicious,
        }
    }

    pub fn total(&self) -> u64 {
        self.benign + self.suspicious
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    schema_version: u64,
    catalog_mode: CatalogMode,
    alpha: Alpha,
    class_counts: ClassCounts,
    features: Vec<ModelFeature>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct LogLikelihood {
    present: f64,
    absent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    catalog_mode: CatalogMode,
    alpha: Alpha,
    class_counts: ClassCounts,
    features: Vec<ModelFeature>,
    log_prior: [f64; 2],
    /// Indexed `[feature][class]`, class order benign then suspicious.
    log_lik: Vec<[LogLikelihood; 2]>,
}

impl TrainedModel {
    pub fn from_counts(
        catalog_mode: CatalogMode,
        alpha: Alpha,
        class_counts: ClassCounts,
        features: Vec<ModelFeature>,
    ) -> Result<Self> {
        if class_counts.benign == 0 {
            return Err(Error::EmptyClass("benign"));
        }
        if class_counts.suspicious == 0 {
            return Err(Error::EmptyClass("suspicious"));
        }
        if alpha.den == 0 {
            return Err(Error::Invalid("alpha denominator must be positive".into()));
        }
        for f in &features {
            if f.count_pos_ben > class_counts.benign || f.count_pos_sus > class_counts.suspicious {
                return Err(Error::Model(format!("feature `{}` counts exceed class sizes", f.name)));
            }
        }
        let total = class_counts.total() as f64;
        let log_prior = [
            (class_counts.benign as f64 / total).ln(),
            (class_counts.suspicious as f64 / total).ln(),
        ];
        let ratio = |count: u64, n: u64| smoothed(count, n, alpha);
        let log_lik = features
            .iter()
            .map(|f| {
                let per_class = |pos: u64, n: u64| LogLikelihood {
                    present: ratio(pos, n).ln(),
                    absent: ratio(n - pos, n).ln(),
                };
                [
                    per_class(f.count_pos_ben, class_counts.benign),
                    per_class(f.count_pos_sus, class_counts.suspicious),
                ]
            })
            .collect();
        Ok(Self {
            catalog_mode,
            alpha,
            class_counts,
            features,
            log_prior,
            log_lik,
        })
    }

    pub fn catalog_mode(&self) -> CatalogMode {
        self.catalog_mode
    }

    pub fn alpha(&self) -> Alpha {
        self.alpha
    }

    pub fn class_counts(&self) -> ClassCounts {
        self.class_counts
    }

    pub fn features(&self) -> &[ModelFeature] {
        &self.features
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn prior(&self, class: ClassLabel) -> f64 {
        self.class_counts.get(class) as f64 / self.class_counts.total() as f64
    }

    /// P(R_i = 1 | C = class) after smoothing.
    pub fn theta(&self, feature: usize, class: ClassLabel) -> f64 {
        let f = &self.features[feature];
        let pos = match class {
            ClassLabel::Benign => f.count_pos_ben,
            ClassLabel::Suspicious => f.count_pos_sus,
        };
        smoothed(pos, self.class_counts.get(class), self.alpha)
    }

    /// Natural-log joint `ln P(c) + Σ ln P(r_i | c)` for both classes,
    /// `bits` in model feature order.
    pub fn log_joint(&self, bits: &[bool]) -> [f64; 2] {
        assert_eq!(bits.len(), self.features.len(), "vector length must match model");
        let mut joint = self.log_prior;
        for (ll, &bit) in self.log_lik.iter().zip(bits) {
            for c in 0..2 {
                joint[c] += if bit { ll[c].present } else { ll[c].absent };
            }
        }
        joint
    }

    /// ln P(sus | r) − ln P(ben | r). Zero when both joints vanish.
    fn log_odds(&self, bits: &[bool]) -> f64 {
        let [ben, sus] = self.log_joint(bits);
        if ben == f64::NEG_INFINITY && sus == f64::NEG_INFINITY {
            return 0.0;
        }
        sus - ben
    }

    /// P(C = suspicious | r), `bits` in model feature order.
    pub fn posterior_bits(&self, bits: &[bool]) -> f64 {
        posterior_from_log_odds(self.log_odds(bits))
    }

    /// Column indices of the model's features within `columns`.
    pub fn projection(&self, columns: &[String]) -> Result<Projection> {
        let names = self.feature_names();
        let matrix = VectorMatrix::new(columns.to_vec());
        Ok(Projection(matrix.columns_for(&names)?))
    }

    pub fn posterior(&self, projection: &Projection, vector: &FeatureVector) -> f64 {
        self.posterior_bits(&projection.apply(vector))
    }

    /// Suspicious iff the posterior reaches `threshold`; at 0.5 an exact tie
    /// between the two classes is decided as suspicious.
    pub fn classify(&self, projection: &Projection, vector: &FeatureVector, threshold: f64) -> Prediction {
        let bits = projection.apply(vector);
        let log_odds = self.log_odds(&bits);
        let cut = (threshold / (1.0 - threshold)).ln();
        let decision = if log_odds >= cut {
            ClassLabel::Suspicious
        } else {
            ClassLabel::Benign
        };
        Prediction {
            sample_id: vector.sample_id.clone(),
            posterior: posterior_from_log_odds(log_odds),
            score: log_odds / std::f64::consts::LN_2,
            decision,
        }
    }

    pub fn classify_matrix(&self, matrix: &VectorMatrix, threshold: f64) -> Result<Vec<Prediction>> {
        let projection = self.projection(&matrix.features)?;
        Ok(matrix
            .rows
            .iter()
            .map(|v| self.classify(&projection, v, threshold))
            .collect())
    }

    pub fn to_json_string(&self) -> String {
        let file = ModelFile {
            schema_version: MODEL_SCHEMA_VERSION,
            catalog_mode: self.catalog_mode,
            alpha: self.alpha,
            class_counts: self.class_counts,
            features: self.features.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Model(e.to_string()))?;
        let version = value
            .get("schema_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::Model("missing integer `schema_version`".into()))?;
        if version != MODEL_SCHEMA_VERSION {
            return Err(Error::ModelVersion {
                found: version,
                expected: MODEL_SCHEMA_VERSION,
            });
        }
        let file: ModelFile = serde_json::from_value(value).map_err(|e| Error::Model(e.to_string()))?;
        TrainedModel::from_counts(file.catalog_mode, file.alpha, file.class_counts, file.features)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }
}

/// (count + α) / (n + 2α), scaled by α's denominator to stay in integers.
fn smoothed(count: u64, n: u64, alpha: Alpha) -> f64 {
    let (a, d) = (alpha.num as u128, alpha.den as u128);
    let num = count as u128 * d + a;
    let den = n as u128 * d + 2 * a;
    num as f64 / den as f64
}

fn posterior_from_log_odds(log_odds: f64) -> f64 {
    if log_odds >= 0.0 {
        1.0 / (1.0 + (-log_odds).exp())
    } else {
        let e = log_odds.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Projection(Vec<usize>);

impl Projection {
    pub fn apply(&self, vector: &FeatureVector) -> Vec<bool> {
        self.0.iter().map(|&c| vector.bits[c]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub sample_id: String,
    /// P(C = suspicious | r).
    pub posterior: f64,
    /// log2 of the posterior odds, suspicious over benign.
    pub score: f64,
    pub decision: ClassLabel,
}

/// Estimate priors and per-feature presence counts for the selected features.
pub fn train(
    matrix: &VectorMatrix,
    selection: &FeatureSelection,
    alpha: Alpha,
    catalog_mode: CatalogMode,
) -> Result<TrainedModel> {
    let cols = matrix.columns_for(&selection.features)?;
    let mut counts = ClassCounts {
        benign: 0,
        suspicious: 0,
    };
    let mut features: Vec<ModelFeature> = selection
        .features
        .iter()
        .map(|name| ModelFeature {
            name: name.clone(),
            count_pos_sus: 0,
            count_pos_ben: 0,
        })
        .collect();
    for row in &matrix.rows {
        let label = row.label.ok_or_else(|| Error::Unlabeled(row.sample_id.clone()))?;
        match label {
            ClassLabel::Benign => counts.benign += 1,
            ClassLabel::Suspicious => counts.suspicious += 1,
        }
        for (f, &c) in features.iter_mut().zip(&cols) {
            if row.bits[c] {
                match label {
                    ClassLabel::Benign => f.count_pos_ben += 1,
                    ClassLabel::Suspicious => f.count_pos_sus += 1,
                }
            }
        }
    }
    TrainedModel::from_counts(catalog_mode, alpha, counts, features)
}
