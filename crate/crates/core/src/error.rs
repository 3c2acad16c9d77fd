use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("corpus root {} does not exist or is not a directory", .0.display())]
    MissingRoot(PathBuf),

    #[error("labels file {}: {message}", path.display())]
    Labels { path: PathBuf, message: String },

    #[error("labels file row {row}: app `{id}` has no directory under the corpus root")]
    MissingSampleDir { row: usize, id: String },

    #[error("labels file row {row}: duplicate app id `{id}`")]
    DuplicateId { row: usize, id: String },

    #[error("sample `{0}` has no AndroidManifest.xml")]
    ManifestMissing(String),

    #[error("catalog: {0}")]
    Catalog(String),

    #[error("catalog line {line}: unknown feature kind `{kind}`")]
    UnknownKind { line: usize, kind: String },

    #[error("catalog: duplicate feature name `{0}`")]
    DuplicateFeature(String),

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("sample `{0}` is unlabeled")]
    Unlabeled(String),

    #[error("class `{0}` has no samples")]
    EmptyClass(&'static str),

    #[error("selection needs {required} ranked features but only {available} are available")]
    InsufficientFeatures { required: usize, available: usize },

    #[error("class `{class}` has {count} samples, fewer than the {k} folds requested")]
    ClassSmallerThanFolds {
        class: &'static str,
        count: usize,
        k: usize,
    },

    #[error("vector matrix: {0}")]
    Matrix(String),

    #[error("model file: {0}")]
    Model(String),

    #[error("model schema version {found} is not supported (expected {expected})")]
    ModelVersion { found: u64, expected: u64 },

    #[error("frequency spec: {0}")]
    Spec(String),

    #[error("output directory {} is not empty", .0.display())]
    OutputNotEmpty(PathBuf),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
