//! Data-driven feature catalog.
//!
//! A catalog file is a JSON array of `{name, kind, pattern, scopes}` objects.
//! File order defines feature index order. The shipped default holds the 131
//! standard platform permissions followed by 58 code-property detectors.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Scope;
use crate::error::{Error, Result};

const BUILTIN_CATALOG: &str = include_str!("../data/catalog.json");

pub const BUILTIN_PERMISSION_COUNT: usize = 131;
pub const BUILTIN_CODE_PROPERTY_COUNT: usize = 58;

/// The shipped default catalog file content.
pub fn builtin_catalog() -> &'static str {
    BUILTIN_CATALOG
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureKind {
    Permission,
    ApiCall,
    StringToken,
    SystemCommand,
    PayloadExtension,
    IntentAction,
    ShellPath,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 7] = [
        FeatureKind::Permission,
        FeatureKind::ApiCall,
        FeatureKind::StringToken,
        FeatureKind::SystemCommand,
        FeatureKind::PayloadExtension,
        FeatureKind::IntentAction,
        FeatureKind::ShellPath,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Permission => "permission",
            FeatureKind::ApiCall => "api-call",
            FeatureKind::StringToken => "string-token",
            FeatureKind::SystemCommand => "system-command",
            FeatureKind::PayloadExtension => "payload-extension",
            FeatureKind::IntentAction => "intent-action",
            FeatureKind::ShellPath => "shell-path",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        FeatureKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}

/// What a detector looks for. A sequence matches when its fragments occur
/// in order on a single line, which lets one definition cover both the Java
/// surface form (`Runtime.exec(`) and the smali one (`Runtime;->exec(`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Pattern {
    Literal(String),
    Sequence(Vec<String>),
}

impl Pattern {
    pub fn fragments(&self) -> &[String] {
        match self {
            Pattern::Literal(s) => std::slice::from_ref(s),
            Pattern::Sequence(v) => v,
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.fragments().join(" … "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureDef {
    pub id: usize,
    pub name: String,
    pub kind: FeatureKind,
    pub pattern: Pattern,
    pub scopes: Vec<Scope>,
}

impl FeatureDef {
    pub fn searches(&self, scope: Scope) -> bool {
        self.scopes.contains(&scope)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CatalogMode {
    /// Permissions only.
    P,
    /// Code properties only.
    C,
    /// Permissions and code properties.
    M,
}

impl CatalogMode {
    pub fn admits(self, kind: FeatureKind) -> bool {
        match self {
            CatalogMode::P => kind == FeatureKind::Permission,
            CatalogMode::C => kind != FeatureKind::Permission,
            CatalogMode::M => true,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CatalogMode::P => "P",
            CatalogMode::C => "C",
            CatalogMode::M => "M",
        }
    }
}

impl fmt::Display for CatalogMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CatalogMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "P" | "p" => Ok(CatalogMode::P),
            "C" | "c" => Ok(CatalogMode::C),
            "M" | "m" => Ok(CatalogMode::M),
            other => Err(Error::Invalid(format!(
                "unknown catalog mode `{other}` (expected P, C or M)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureCatalog {
    pub mode: CatalogMode,
    pub defs: Vec<FeatureDef>,
}

impl FeatureCatalog {
    pub fn len(&self) -> usize {
        self.defs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.defs.iter().map(|d| d.name.clone()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&FeatureDef> {
        self.defs.iter().find(|d| d.name == name)
    }

    /// Keep only the named features, preserving catalog order.
    pub fn project<S: AsRef<str>>(&self, names: &[S]) -> Result<FeatureCatalog> {
        let wanted: HashSet<&str> = names.iter().map(|s| s.as_ref()).collect();
        for name in &wanted {
            if self.get(name).is_none() {
                return Err(Error::UnknownFeature(name.to_string()));
            }
        }
        let defs = self
            .defs
            .iter()
            .filter(|d| wanted.contains(d.name.as_str()))
            .cloned()
            .enumerate()
            .map(|(id, d)| FeatureDef { id, ..d })
            .collect();
        Ok(FeatureCatalog { mode: self.mode, defs })
    }

    /// Canonical file form: one compact object per line.
    pub fn to_json_string(&self) -> String {
        let lines: Vec<String> = self
            .defs
            .iter()
            .map(|d| {
                serde_json::to_string(&RawDefRef {
                    name: &d.name,
                    kind: d.kind.as_str(),
                    pattern: &d.pattern,
                    scopes: &d.scopes,
                })
                .expect("catalog entries always serialize")
            })
            .collect();
        if lines.is_empty() {
            return "[\n]\n".to_string();
        }
        format!("[\n{}\n]\n", lines.join(",\n"))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDef {
    name: String,
    kind: String,
    pattern: Pattern,
    scopes: Vec<Scope>,
}

#[derive(Serialize)]
struct RawDefRef<'a> {
    name: &'a str,
    kind: &'a str,
    pattern: &'a Pattern,
    scopes: &'a [Scope],
}

/// Load a catalog file, or the shipped default when `path` is `builtin`.
pub fn load_catalog(path: &Path, mode: CatalogMode) -> Result<FeatureCatalog> {
    if path.as_os_str() == "builtin" {
        return parse_catalog(BUILTIN_CATALOG, mode);
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_catalog(&text, mode)
}

pub fn parse_catalog(text: &str, mode: CatalogMode) -> Result<FeatureCatalog> {
    let entries = parse_entries(text)?;
    let mut seen = HashSet::new();
    let mut all = Vec::with_capacity(entries.len());
    for (line, raw) in entries {
        let kind: FeatureKind = raw.kind.parse().map_err(|kind| Error::UnknownKind { line, kind })?;
        if !seen.insert(raw.name.clone()) {
            return Err(Error::DuplicateFeature(raw.name));
        }
        validate(line, &raw.name, kind, &raw.pattern, &raw.scopes)?;
        all.push(FeatureDef {
            id: 0,
            name: raw.name,
            kind,
            pattern: raw.pattern,
            scopes: raw.scopes,
        });
    }
    let defs = all
        .into_iter()
        .filter(|d| mode.admits(d.kind))
        .enumerate()
        .map(|(id, d)| FeatureDef { id, ..d })
        .collect();
    Ok(FeatureCatalog { mode, defs })
}

fn validate(line: usize, name: &str, kind: FeatureKind, pattern: &Pattern, scopes: &[Scope]) -> Result<()> {
    let fail = |msg: String| Err(Error::Catalog(format!("line {line}: feature `{name}`: {msg}")));
    if name.is_empty() {
        return fail("empty name".into());
    }
    if pattern.fragments().is_empty() || pattern.fragments().iter().any(|f| f.is_empty() || f.contains('\n')) {
        return fail("patterns must be non-empty single-line strings".into());
    }
    if scopes.is_empty() {
        return fail("no scopes".into());
    }
    let unique: HashSet<_> = scopes.iter().collect();
    if unique.len() != scopes.len() {
        return fail("repeated scope".into());
    }
    match kind {
        FeatureKind::Permission => {
            if scopes != [Scope::Manifest] {
                return fail("permission features search exactly the manifest scope".into());
            }
            if !matches!(pattern, Pattern::Literal(_)) {
                return fail("permission patterns are single attribute values".into());
            }
        }
        FeatureKind::PayloadExtension => {
            if !matches!(pattern, Pattern::Literal(_)) {
                return fail("payload-extension patterns are single suffixes".into());
            }
            if scopes.iter().any(|s| !s.is_payload()) {
                return fail("payload-extension features search only assets, resources or native-lib".into());
            }
        }
        _ => {
            if scopes.contains(&Scope::Manifest) {
                return fail(format!("{kind} features never search the manifest"));
            }
        }
    }
    Ok(())
}

/// Parse the top-level array, tracking the starting line of each element.
fn parse_entries(text: &str) -> Result<Vec<(usize, RawDef)>> {
    let bytes = text.as_bytes();
    let line_at = |pos: usize| 1 + bytes[..pos].iter().filter(|&&b| b == b'\n').count();
    let skip_ws = |mut pos: usize| {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        pos
    };

    let mut pos = skip_ws(0);
    if bytes.get(pos) != Some(&b'[') {
        return Err(Error::Catalog(format!(
            "line {}: expected a JSON array of feature definitions",
            line_at(pos.min(bytes.len()))
        )));
    }
    pos = skip_ws(pos + 1);
    let mut out = Vec::new();
    if bytes.get(pos) == Some(&b']') {
        pos += 1;
    } else {
        loop {
            let line = line_at(pos);
            let mut stream = serde_json::Deserializer::from_str(&text[pos..]).into_iter::<RawDef>();
            let raw = match stream.next() {
                Some(Ok(raw)) => raw,
                Some(Err(e)) => {
                    return Err(Error::Catalog(format!(
                        "line {}: {e}",
                        line + e.line().saturating_sub(1)
                    )))
                }
                None => return Err(Error::Catalog(format!("line {line}: unterminated array"))),
            };
            pos += stream.byte_offset();
            out.push((line, raw));
            pos = skip_ws(pos);
            match bytes.get(pos) {
                Some(b',') => pos = skip_ws(pos + 1),
                Some(b']') => {
                    pos += 1;
                    break;
                }
                _ => {
                    return Err(Error::Catalog(format!(
                        "line {}: expected `,` or `]`",
                        line_at(pos.min(bytes.len()))
                    )))
                }
            }
        }
    }
    if skip_ws(pos) != bytes.len() {
        return Err(Error::Catalog(format!(
            "line {}: trailing content after array",
            line_at(pos)
        )));
    }
    Ok(out)
}
