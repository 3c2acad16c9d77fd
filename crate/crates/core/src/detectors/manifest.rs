use std::collections::HashSet;

use super::{Detector, ScanContext};
use crate::catalog::{FeatureDef, FeatureKind, Pattern};

const ANDROID_NS: &str = "http://schemas.android.com/apk/res/android";

/// Matches `<uses-permission android:name="…">` attribute values exactly.
#[derive(Debug, Clone, Copy, Default)]
pub struct PermissionDetector;

impl Detector for PermissionDetector {
    fn name(&self) -> &'static str {
        "uses-permission"
    }

    fn kinds(&self) -> &'static [FeatureKind] {
        &[FeatureKind::Permission]
    }

    fn detect(&self, def: &FeatureDef, ctx: &mut ScanContext<'_>) -> bool {
        let Pattern::Literal(value) = &def.pattern else {
            return false;
        };
        ctx.declared_permissions().is_some_and(|set| set.contains(value))
    }
}

pub fn detect_permission(manifest: &str, def: &FeatureDef) -> bool {
    let Pattern::Literal(value) = &def.pattern else {
        return false;
    };
    declared_permissions(manifest).0.contains(value)
}

/// Permission names requested through `<uses-permission>` elements.
///
/// Manifests that are not well-formed XML fall back to a plain attribute
/// scan (comments stripped); the second value then carries a warning.
pub fn declared_permissions(manifest: &str) -> (HashSet<String>, Option<String>) {
    match roxmltree::Document::parse(manifest) {
        Ok(doc) => {
            let set = doc
                .descendants()
                .filter(|n| n.is_element() && n.tag_name().name() == "uses-permission")
                .filter_map(|n| {
                    n.attribute((ANDROID_NS, "name"))
                        .or_else(|| n.attributes().find(|a| a.name() == "name").map(|a| a.value()))
                })
                .map(str::to_string)
                .collect();
            (set, None)
        }
        Err(_) if manifest.trim().is_empty() => (HashSet::new(), None),
        Err(e) => (
            attribute_scan(manifest),
            Some(format!("manifest is not well-formed XML ({e}); used attribute scan")),
        ),
    }
}

fn attribute_scan(manifest: &str) -> HashSet<String> {
    let text = strip_comments(manifest);
    let mut out = HashSet::new();
    let mut rest = text.as_str();
    while let Some(start) = rest.find("<uses-permission") {
        let after = &rest[start + "<uses-permission".len()..];
        // `<uses-permission-sdk-23` and similar are different elements
        if after.starts_with(|c: char| c == '-' || c.is_alphanumeric()) {
            rest = after;
            continue;
        }
        let end = after.find('>').unwrap_or(after.len());
        let tag = &after[..end];
        if let Some(value) = attr_value(tag, "android:name") {
            out.insert(value.to_string());
        }
        rest = &after[end..];
    }
    out
}

fn attr_value<'t>(tag: &'t str, attr: &str) -> Option<&'t str> {
    let mut search = tag;
    while let Some(pos) = search.find(attr) {
        let after = search[pos + attr.len()..].trim_start();
        if let Some(after_eq) = after.strip_prefix('=') {
            let after_eq = after_eq.trim_start();
            let quote = after_eq.chars().next()?;
            if quote == '"' || quote == '\'' {
                let body = &after_eq[1..];
                return body.find(quote).map(|e| &body[..e]);
            }
        }
        search = &search[pos + attr.len()..];
    }
    None
}

fn strip_comments(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = rest.find("<!--") {
        out.push_str(&rest[..start]);
        match rest[start + 4..].find("-->") {
            Some(end) => rest = &rest[start + 4 + end + 3..],
            None => {
                rest = "";
                break;
            }
        }
    }
    out.push_str(rest);
    out
}
