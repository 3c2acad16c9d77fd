//! Directory-tree corpus of decoded app packages.
//!
//! Layout, one directory per app under the corpus root:
//!
//! ```text
//! <root>/<app-id>/AndroidManifest.xml   manifest (decoded text XML)
//! <root>/<app-id>/smali/**/*.smali      code
//! <root>/<app-id>/assets/**             assets
//! <root>/<app-id>/res/**                resources
//! <root>/<app-id>/lib/**                native libraries
//! ```
//!
//! Labels come from a sidecar CSV with header `app_id,label`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "AndroidManifest.xml";
pub const LABELS_HEADER: [&str; 2] = ["app_id", "label"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassLabel {
    Benign,
    Suspicious,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 2] = [ClassLabel::Benign, ClassLabel::Suspicious];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::Benign => "benign",
            ClassLabel::Suspicious => "suspicious",
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            ClassLabel::Benign => ClassLabel::Suspicious,
            ClassLabel::Suspicious => ClassLabel::Benign,
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "benign" => Ok(ClassLabel::Benign),
            "suspicious" => Ok(ClassLabel::Suspicious),
            other => Err(Error::Invalid(format!(
                "unknown label `{other}` (expected benign or suspicious)"
            ))),
        }
    }
}

/// Where a member file lives inside an app tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    Manifest,
    Code,
    Assets,
    Resources,
    NativeLib,
    Other,
}

impl Scope {
    pub const ALL: [Scope; 6] = [
        Scope::Manifest,
        Scope::Code,
        Scope::Assets,
        Scope::Resources,
        Scope::NativeLib,
        Scope::Other,
    ];

    /// Classify a sample-relative, `/`-separated path.
    pub fn of(rel_path: &str) -> Scope {
        if rel_path == MANIFEST_FILE {
            Scope::Manifest
        } else if rel_path.starts_with("smali/") && rel_path.ends_with(".smali") {
            Scope::Code
        } else if rel_path.starts_with("assets/") {
            Scope::Assets
        } else if rel_path.starts_with("res/") {
            Scope::Resources
        } else if rel_path.starts_with("lib/") {
            Scope::NativeLib
        } else {
            Scope::Other
        }
    }

    pub fn is_payload(self) -> bool {
        matches!(self, Scope::Assets | Scope::Resources | Scope::NativeLib)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scope::Manifest => "manifest",
            Scope::Code => "code",
            Scope::Assets => "assets",
            Scope::Resources => "resources",
            Scope::NativeLib => "native-lib",
            Scope::Other => "other",
        }
    }

    /// Directory under the sample root that holds this scope, if any.
    pub fn dir_name(self) -> Option<&'static str> {
        match self {
            Scope::Code => Some("smali"),
            Scope::Assets => Some("assets"),
            Scope::Resources => Some("res"),
            Scope::NativeLib => Some("lib"),
            Scope::Manifest | Scope::Other => None,
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemberFile {
    /// Sample-relative path with `/` separators.
    pub path: String,
    pub abs: PathBuf,
    pub scope: Scope,
    pub size: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Inventory {
    pub files: Vec<MemberFile>,
    pub warnings: Vec<String>,
}

impl Inventory {
    pub fn in_scope(&self, scope: Scope) -> impl Iterator<Item = &MemberFile> {
        self.files.iter().filter(move |f| f.scope == scope)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AppSample {
    pub id: String,
    pub label: Option<ClassLabel>,
    pub dir: PathBuf,
}

impl AppSample {
    pub fn manifest_path(&self) -> PathBuf {
        self.dir.join(MANIFEST_FILE)
    }

    pub fn read_manifest(&self) -> Result<String> {
        let path = self.manifest_path();
        match fs::read(&path) {
            Ok(bytes) => Ok(String::from_utf8_lossy(&bytes).into_owned()),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::ManifestMissing(self.id.clone())),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    /// Every member file, sorted byte-wise by relative path. Entries whose
    /// metadata cannot be read (dangling links, races) are skipped with a warning.
    pub fn inventory(&self) -> Inventory {
        let mut inv = Inventory::default();
        for entry in WalkDir::new(&self.dir).follow_links(false).min_depth(1) {
            let entry = match entry {
                Ok(e) => e,
                Err(e) => {
                    inv.warnings.push(format!("{}: {e}", self.id));
                    continue;
                }
            };
            if entry.file_type().is_dir() {
                continue;
            }
            let abs = entry.path().to_path_buf();
            let meta = match fs::metadata(&abs) {
                Ok(m) => m,
                Err(e) => {
                    inv.warnings
                        .push(format!("{}: unreadable {}: {e}", self.id, abs.display()));
                    continue;
                }
            };
            if meta.is_dir() {
                continue;
            }
            let Some(path) = relative_slash_path(&self.dir, &abs) else {
                continue;
            };
            let scope = Scope::of(&path);
            inv.files.push(MemberFile {
                path,
                abs,
                scope,
                size: meta.len(),
            });
        }
        inv.files.sort_by(|a, b| a.path.as_bytes().cmp(b.path.as_bytes()));
        inv
    }

    /// Code units in path order. Files that cannot be opened are dropped
    /// and reported in the returned warnings.
    pub fn enumerate_code_units(&self) -> (Vec<MemberFile>, Vec<String>) {
        let inv = self.inventory();
        let mut warnings = inv.warnings;
        let mut units = Vec::new();
        for file in inv.files.into_iter().filter(|f| f.scope == Scope::Code) {
            match fs::File::open(&file.abs) {
                Ok(_) => units.push(file),
                Err(e) => warnings.push(format!("{}: unreadable {}: {e}", self.id, file.path)),
            }
        }
        (units, warnings)
    }

    pub fn enumerate_payload_files(&self) -> Vec<(String, Scope)> {
        self.inventory()
            .files
            .into_iter()
            .filter(|f| f.scope.is_payload())
            .map(|f| (f.path, f.scope))
            .collect()
    }
}

fn relative_slash_path(base: &Path, path: &Path) -> Option<String> {
    let rel = path.strip_prefix(base).ok()?;
    let parts: Vec<_> = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect();
    Some(parts.join("/"))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub benign: usize,
    pub suspicious: usize,
    pub unlabeled: usize,
}

impl LabelCounts {
    pub fn total(&self) -> usize {
        self.benign + self.suspicious + self.unlabeled
    }

    pub fn get(&self, label: ClassLabel) -> usize {
        match label {
            ClassLabel::Benign => self.benign,
            ClassLabel::Suspicious => self.suspicious,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub root: PathBuf,
    pub samples: Vec<AppSample>,
}

impl Corpus {
    pub fn label_counts(&self) -> LabelCounts {
        let mut counts = LabelCounts::default();
        for s in &self.samples {
            match s.label {
                Some(ClassLabel::Benign) => counts.benign += 1,
                Some(ClassLabel::Suspicious) => counts.suspicious += 1,
                None => counts.unlabeled += 1,
            }
        }
        counts
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Load every app directory under `root`, attaching labels from `labels`
/// when given. Directories without a label row are kept as unlabeled.
pub fn load_corpus(root: &Path, labels: Option<&Path>) -> Result<Corpus> {
    if !root.is_dir() {
        return Err(Error::MissingRoot(root.to_path_buf()));
    }
    let mut dirs = BTreeMap::new();
    let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        let path = entry.path();
        if !path.is_dir() {
            continue;
        }
        let id = entry.file_name().to_string_lossy().into_owned();
        dirs.insert(id.into_bytes(), path);
    }

    let mut label_of = BTreeMap::new();
    if let Some(labels) = labels {
        for (row, id, label) in read_labels(labels)? {
            if !dirs.contains_key(id.as_bytes()) {
                return Err(Error::MissingSampleDir { row, id });
            }
            label_of.insert(id, label);
        }
    }

    let samples = dirs
        .into_iter()
        .map(|(id, dir)| {
            let id = String::from_utf8(id).expect("ids come from lossy strings");
            let label = label_of.get(&id).copied();
            AppSample { id, label, dir }
        })
        .collect();
    Ok(Corpus {
        root: root.to_path_buf(),
        samples,
    })
}

/// Parse a labels CSV into `(line, app_id, label)` rows.
pub fn read_labels(path: &Path) -> Result<Vec<(usize, String, ClassLabel)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labels(&text)
        .map_err(|message| Error::Labels {
            path: path.to_path_buf(),
            message,
        })
        .and_then(|rows| {
            let mut seen = HashSet::new();
            for (row, id, _) in &rows {
                if !seen.insert(id.as_str()) {
                    return Err(Error::DuplicateId {
                        row: *row,
                        id: id.clone(),
                    });
                }
            }
            Ok(rows)
        })
}

fn parse_labels(text: &str) -> std::result::Result<Vec<(usize, String, ClassLabel)>, String> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| e.to_string())?;
    if header.iter().collect::<Vec<_>>() != LABELS_HEADER {
        return Err(format!(
            "expected header `app_id,label`, found `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        ));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| e.to_string())?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let id = record.get(0).unwrap_or("").to_string();
        if id.is_empty() {
            return Err(format!("line {line}: empty app id"));
        }
        let label = record
            .get(1)
            .unwrap_or("")
            .parse::<ClassLabel>()
            .map_err(|e| format!("line {line}: {e}"))?;
        rows.push((line, id, label));
    }
    Ok(rows)
}

pub fn write_labels<'a>(path: &Path, rows: impl IntoIterator<Item = (&'a str, ClassLabel)>) -> Result<()> {
    let mut out = String::from("app_id,label\n");
    for (id, label) in rows {
        out.push_str(id);
        out.push(',');
        out.push_str(label.as_str());
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
