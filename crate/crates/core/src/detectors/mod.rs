//! Feature detectors and the extraction engine.
//!
//! Each [`FeatureKind`] is served by a [`Detector`] strategy looked up in a
//! [`DetectorRegistry`]. A catalog's `kind` strings therefore pick the
//! matching strategy at runtime; replacing or adding a strategy is a
//! `register` call away.

mod lines;
mod manifest;
mod payload;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::catalog::{FeatureCatalog, FeatureDef, FeatureKind};
use crate::corpus::{AppSample, Corpus, Inventory, Scope};
use crate::error::{Error, Result};
use crate::matrix::{FeatureVector, VectorMatrix};

pub use lines::{detect_code_property, pattern_in, LineTokenDetector};
pub use manifest::{declared_permissions, detect_permission, PermissionDetector};
pub use payload::{scan_embedded_payloads, PayloadExtensionDetector};

pub const DEFAULT_MAX_FILE_BYTES: u64 = 16 * 1024 * 1024;

/// One detection strategy. Implementations must be pure with respect to the
/// sample tree: the same context always yields the same bit.
pub trait Detector: Send + Sync {
    fn name(&self) -> &'static str;

    /// Kinds this strategy is registered for by [`DetectorRegistry::builtin`].
    fn kinds(&self) -> &'static [FeatureKind];

    fn detect(&self, def: &FeatureDef, ctx: &mut ScanContext<'_>) -> bool;
}

#[derive(Clone, Default)]
pub struct DetectorRegistry {
    by_kind: BTreeMap<FeatureKind, Arc<dyn Detector>>,
}

impl fmt::Debug for DetectorRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map()
            .entries(self.by_kind.iter().map(|(k, d)| (k.as_str(), d.name())))
            .finish()
    }
}

impl DetectorRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn builtin() -> Self {
        let mut registry = Self::new();
        registry.register(Arc::new(PermissionDetector));
        registry.register(Arc::new(LineTokenDetector));
        registry.register(Arc::new(PayloadExtensionDetector));
        registry
    }

    /// Register `detector` for every kind it declares, replacing earlier entries.
    pub fn register(&mut self, detector: Arc<dyn Detector>) {
        for &kind in detector.kinds() {
            self.by_kind.insert(kind, Arc::clone(&detector));
        }
    }

    pub fn register_for(&mut self, kind: FeatureKind, detector: Arc<dyn Detector>) {
        self.by_kind.insert(kind, detector);
    }

    pub fn get(&self, kind: FeatureKind) -> Option<&Arc<dyn Detector>> {
        self.by_kind.get(&kind)
    }

    pub fn kinds(&self) -> impl Iterator<Item = FeatureKind> + '_ {
        self.by_kind.keys().copied()
    }

    fn check_covers(&self, catalog: &FeatureCatalog) -> Result<()> {
        for def in &catalog.defs {
            if self.get(def.kind).is_none() {
                return Err(Error::Catalog(format!(
                    "no detector registered for kind `{}` (feature `{}`)",
                    def.kind, def.name
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LoadedFile {
    pub path: String,
    pub bytes: Vec<u8>,
}

/// Per-sample scan state. Files are listed once, read at most once, and
/// only for scopes some detector asks about.
pub struct ScanContext<'a> {
    sample: &'a AppSample,
    max_file_bytes: u64,
    inventory: Option<Inventory>,
    permissions: Option<Option<HashSet<String>>>,
    loaded: HashMap<Scope, Vec<LoadedFile>>,
    files_by_scope: BTreeMap<Scope, usize>,
    warnings: Vec<String>,
}

impl<'a> ScanContext<'a> {
    pub fn new(sample: &'a AppSample, max_file_bytes: u64) -> Self {
        Self {
            sample,
            max_file_bytes,
            inventory: None,
            permissions: None,
            loaded: HashMap::new(),
            files_by_scope: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    pub fn sample(&self) -> &AppSample {
        self.sample
    }

    pub fn warn(&mut self, message: String) {
        self.warnings.push(message);
    }

    fn inventory(&mut self) -> &Inventory {
        if self.inventory.is_none() {
            let inv = self.sample.inventory();
            self.warnings.extend(inv.warnings.iter().cloned());
            self.inventory = Some(inv);
        }
        self.inventory.as_ref().expect("just set")
    }

    /// Permission names declared by the manifest, or `None` if it is missing.
    pub fn declared_permissions(&mut self) -> Option<&HashSet<String>> {
        if self.permissions.is_none() {
            let parsed = match self.sample.read_manifest() {
                Ok(text) => {
                    *self.files_by_scope.entry(Scope::Manifest).or_default() += 1;
                    let (set, warning) = declared_permissions(&text);
                    if let Some(w) = warning {
                        self.warnings.push(format!("{}: {w}", self.sample.id));
                    }
                    Some(set)
                }
                Err(e) => {
                    self.warnings.push(e.to_string());
                    None
                }
            };
            self.permissions = Some(parsed);
        }
        self.permissions.as_ref().expect("just set").as_ref()
    }

    /// Sample-relative paths of every file in `scope`, without reading them.
    pub fn paths_in(&mut self, scope: Scope) -> Vec<String> {
        self.inventory().in_scope(scope).map(|f| f.path.clone()).collect()
    }

    /// Contents of every readable file in `scope`, in path order.
    pub fn files_in(&mut self, scope: Scope) -> &[LoadedFile] {
        if !self.loaded.contains_key(&scope) {
            let members: Vec<_> = self.inventory().in_scope(scope).cloned().collect();
            let mut files = Vec::with_capacity(members.len());
            for member in members {
                if member.size > self.max_file_bytes {
                    self.warnings.push(format!(
                        "{}: skipped {} ({} bytes exceeds the {} byte cap)",
                        self.sample.id, member.path, member.size, self.max_file_bytes
                    ));
                    continue;
                }
                match fs::read(&member.abs) {
                    Ok(bytes) => files.push(LoadedFile {
                        path: member.path,
                        bytes,
                    }),
                    Err(e) => self
                        .warnings
                        .push(format!("{}: unreadable {}: {e}", self.sample.id, member.path)),
                }
            }
            *self.files_by_scope.entry(scope).or_default() += files.len();
            self.loaded.insert(scope, files);
        }
        &self.loaded[&scope]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractionStats {
    pub sample_id: String,
    pub duration: Duration,
    pub files_by_scope: BTreeMap<Scope, usize>,
    pub warnings: Vec<String>,
}

impl ExtractionStats {
    pub fn files_scanned(&self) -> usize {
        self.files_by_scope.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CorpusStats {
    pub samples: Vec<ExtractionStats>,
    /// Wall-clock time of the whole extraction.
    pub wall: Duration,
}

impl CorpusStats {
    /// Sum of per-sample durations.
    pub fn total(&self) -> Duration {
        self.samples.iter().map(|s| s.duration).sum()
    }

    pub fn mean(&self) -> Duration {
        if self.samples.is_empty() {
            Duration::ZERO
        } else {
            self.total() / self.samples.len() as u32
        }
    }

    pub fn warnings(&self) -> impl Iterator<Item = &str> {
        self.samples.iter().flat_map(|s| s.warnings.iter().map(String::as_str))
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("app_id,duration_ms,files_scanned,warnings\n");
        for s in &self.samples {
            out.push_str(&format!(
                "{},{:.3},{},{}\n",
                csv_field(&s.sample_id),
                s.duration.as_secs_f64() * 1000.0,
                s.files_scanned(),
                s.warnings.len()
            ));
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone)]
pub struct Extractor {
    registry: DetectorRegistry,
    max_file_bytes: u64,
}

impl Default for Extractor {
    fn default() -> Self {
        Self::new(DetectorRegistry::builtin())
    }
}

impl Extractor {
    pub fn new(registry: DetectorRegistry) -> Self {
        Self {
            registry,
            max_file_bytes: DEFAULT_MAX_FILE_BYTES,
        }
    }

    pub fn with_max_file_bytes(mut self, cap: u64) -> Self {
        self.max_file_bytes = cap;
        self
    }

    pub fn registry(&self) -> &DetectorRegistry {
        &self.registry
    }

    /// Bit `i` is set iff feature `i` is found in at least one file of its scopes.
    pub fn extract_features(
        &self,
        sample: &AppSample,
        catalog: &FeatureCatalog,
    ) -> Result<(FeatureVector, ExtractionStats)> {
        self.registry.check_covers(catalog)?;
        Ok(self.extract_unchecked(sample, catalog))
    }

    fn extract_unchecked(&self, sample: &AppSample, catalog: &FeatureCatalog) -> (FeatureVector, ExtractionStats) {
        let start = Instant::now();
        let mut ctx = ScanContext::new(sample, self.max_file_bytes);
        let bits = catalog
            .defs
            .iter()
            .map(|def| {
                let detector = self.registry.get(def.kind).expect("coverage checked");
                detector.detect(def, &mut ctx)
            })
            .collect();
        let duration = start.elapsed();
        let vector = FeatureVector {
            sample_id: sample.id.clone(),
            label: sample.label,
            bits,
        };
        let stats = ExtractionStats {
            sample_id: sample.id.clone(),
            duration,
            files_by_scope: ctx.files_by_scope,
            warnings: ctx.warnings,
        };
        (vector, stats)
    }

    /// One vector per sample in corpus order. `workers == 0` uses all cores.
    pub fn extract_corpus(
        &self,
        corpus: &Corpus,
        catalog: &FeatureCatalog,
        workers: usize,
    ) -> Result<(VectorMatrix, CorpusStats)> {
        self.registry.check_covers(catalog)?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Invalid(format!("worker pool: {e}")))?;
        let start = Instant::now();
        let results: Vec<_> = pool.install(|| {
            corpus
                .samples
                .par_iter()
                .map(|s| self.extract_unchecked(s, catalog))
                .collect()
        });
        let wall = start.elapsed();
        let mut matrix = VectorMatrix::new(catalog.names());
        let mut stats = CorpusStats {
            samples: Vec::with_capacity(results.len()),
            wall,
        };
        for (vector, s) in results {
            matrix.rows.push(vector);
            stats.samples.push(s);
        }
        Ok((matrix, stats))
    }
}

pub fn extract_features(sample: &AppSample, catalog: &FeatureCatalog) -> Result<(FeatureVector, ExtractionStats)> {
    Extractor::default().extract_features(sample, catalog)
}

pub fn extract_corpus(
    corpus: &Corpus,
    catalog: &FeatureCatalog,
    workers: usize,
) -> Result<(VectorMatrix, CorpusStats)> {
    Extractor::default().extract_corpus(corpus, catalog, workers)
}
