use super::{Detector, ScanContext};
use crate::catalog::{FeatureDef, FeatureKind, Pattern};
use crate::corpus::AppSample;

/// Flags embedded files by path suffix (`.apk`, `.jar`, `.so`, …).
#[derive(Debug, Clone, Copy, Default)]
pub struct PayloadExtensionDetector;

impl Detector for PayloadExtensionDetector {
    fn name(&self) -> &'static str {
        "payload-extension"
    }

    fn kinds(&self) -> &'static [FeatureKind] {
        &[FeatureKind::PayloadExtension]
    }

    fn detect(&self, def: &FeatureDef, ctx: &mut ScanContext<'_>) -> bool {
        let Pattern::Literal(suffix) = &def.pattern else {
            return false;
        };
        def.scopes
            .iter()
            .any(|&scope| ctx.paths_in(scope).iter().any(|p| p.ends_with(suffix.as_str())))
    }
}

pub fn scan_embedded_payloads(sample: &AppSample, def: &FeatureDef) -> bool {
    let Pattern::Literal(suffix) = &def.pattern else {
        return false;
    };
    sample
        .enumerate_payload_files()
        .iter()
        .any(|(path, scope)| def.searches(*scope) && path.ends_with(suffix.as_str()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Scope;
    use std::fs;
    use tempfile::TempDir;

    fn ext(suffix: &str) -> FeatureDef {
        FeatureDef {
            id: 0,
            name: suffix.into(),
            kind: FeatureKind::PayloadExtension,
            pattern: Pattern::Literal(suffix.into()),
            scopes: vec![Scope::Assets, Scope::Resources, Scope::NativeLib],
        }
    }

    fn app(tmp: &TempDir, files: &[&str]) -> AppSample {
        let dir = tmp.path().join("app");
        fs::create_dir_all(&dir).unwrap();
        for f in files {
            let p = dir.join(f);
            fs::create_dir_all(p.parent().unwrap()).unwrap();
            fs::write(p, b"").unwrap();
        }
        AppSample {
            id: "app".into(),
            label: None,
            dir,
        }
    }

    #[test]
    fn apk_in_assets() {
        let tmp = TempDir::new().unwrap();
        let s = app(&tmp, &["assets/update.apk"]);
        assert!(scan_embedded_payloads(&s, &ext(".apk")));
    }

    #[test]
    fn nothing_embedded() {
        let tmp = TempDir::new().unwrap();
        let s = app(&tmp, &["smali/A.smali"]);
        assert!(!scan_embedded_payloads(&s, &ext(".apk")));
    }

    #[test]
    fn jar_in_resources() {
        let tmp = TempDir::new().unwrap();
        let s = app(&tmp, &["res/raw/lib.jar"]);
        assert!(scan_embedded_payloads(&s, &ext(".jar")));
        assert!(!scan_embedded_payloads(&s, &ext(".apk")));
    }

    #[test]
    fn files_outside_payload_scopes_ignored() {
        let tmp = TempDir::new().unwrap();
        let s = app(&tmp, &["META-INF/x.apk", "smali/y.apk"]);
        assert!(!scan_embedded_payloads(&s, &ext(".apk")));
    }
}
