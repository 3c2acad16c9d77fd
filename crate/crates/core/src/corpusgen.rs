//! Synthetic corpora with exact per-class feature frequencies.
//!
//! Each feature gets one trigger artifact: a `<uses-permission>` element, a
//! `const-string` line in the first scope the feature searches, or an empty
//! payload file. Triggers are planted in samples chosen by a seed-keyed
//! permutation so that extraction recovers every target count exactly.
//!
//! Some triggers fire other features too (`remount` contains `mount`). Such
//! implied presences are counted first, and only the remainder of a target
//! is planted directly; a target smaller than its implied count is rejected.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::catalog::{FeatureCatalog, FeatureDef, FeatureKind, Pattern};
use crate::corpus::{write_labels, ClassLabel, Scope, MANIFEST_FILE};
use crate::detectors::pattern_in;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

pub const TABLE4_CSV: &str = include_str!("../data/table4.csv");
pub const TABLE5_CSV: &str = include_str!("../data/table5.csv");
pub const TABLE6_CSV: &str = include_str!("../data/table6.csv");

/// Shipped frequency tables by file name.
pub fn shipped_table(name: &str) -> Option<&'static str> {
    match name {
        "table4" | "table4.csv" => Some(TABLE4_CSV),
        "table5" | "table5.csv" => Some(TABLE5_CSV),
        "table6" | "table6.csv" => Some(TABLE6_CSV),
        _ => None,
    }
}

const LABEL_STREAM: u64 = 0x6C61_6265;
const PLANT_STREAM: u64 = 0x706C_616E;
const CODE_FILE: &str = "smali/com/example/app/Main.smali";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyEntry {
    pub feature: String,
    pub benign: u64,
    pub malware: u64,
}

impl FrequencyEntry {
    fn target(&self, class: ClassLabel) -> u64 {
        match class {
            ClassLabel::Benign => self.benign,
            ClassLabel::Suspicious => self.malware,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencySpec {
    pub n_ben: u64,
    pub n_sus: u64,
    pub seed: u64,
    pub entries: Vec<FrequencyEntry>,
}

impl FrequencySpec {
    fn class_size(&self, class: ClassLabel) -> u64 {
        match class {
            ClassLabel::Benign => self.n_ben,
            ClassLabel::Suspicious => self.n_sus,
        }
    }

    pub fn validate(&self, catalog: &FeatureCatalog) -> Result<()> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if catalog.get(&e.feature).is_none() {
                return Err(Error::UnknownFeature(e.feature.clone()));
            }
            if !seen.insert(e.feature.as_str()) {
                return Err(Error::Spec(format!("feature `{}` listed twice", e.feature)));
            }
            for class in ClassLabel::ALL {
                if e.target(class) > self.class_size(class) {
                    return Err(Error::Spec(format!(
                        "feature `{}`: {} count {} exceeds class size {}",
                        e.feature,
                        class,
                        e.target(class),
                        self.class_size(class)
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Parse a `feature,benign_count,malware_count` table into a spec.
pub fn spec_from_table(
    csv_text: &str,
    catalog: &FeatureCatalog,
    n_ben: u64,
    n_sus: u64,
    seed: u64,
) -> Result<FrequencySpec> {
    let mut entries = Vec::new();
    if !csv_text.trim().is_empty() {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(csv_text.as_bytes());
        let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        if header != ["feature", "benign_count", "malware_count"] {
            return Err(Error::Spec(format!(
                "expected header `feature,benign_count,malware_count`, found `{}`",
                header.join(",")
            )));
        }
        for record in reader.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let count =
                |i: usize| -> Result<u64> {
                    record.get(i).unwrap_or("").parse().map_err(|_| {
                        Error::Spec(format!("line {line}: `{}` is not a count", record.get(i).unwrap_or("")))
                    })
                };
            entries.push(FrequencyEntry {
                feature: record.get(0).unwrap_or("").to_string(),
                benign: count(1)?,
                malware: count(2)?,
            });
        }
    }
    let spec = FrequencySpec {
        n_ben,
        n_sus,
        seed,
        entries,
    };
    spec.validate(catalog)?;
    Ok(spec)
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Trigger {
    Permission(String),
    Line { scope: Scope, text: String },
    File { path: String },
}

fn line_file(scope: Scope) -> &'static str {
    match scope {
        Scope::Code => CODE_FILE,
        Scope::Assets => "assets/strings.txt",
        Scope::Resources => "res/raw/strings.txt",
        Scope::NativeLib => "lib/armeabi/libstrings.so",
        Scope::Manifest | Scope::Other => unreachable!("line triggers never target {scope}"),
    }
}

fn trigger_for(def: &FeatureDef) -> Result<Trigger> {
    let bad = || Error::Spec(format!("feature `{}` has no plantable scope", def.name));
    match def.kind {
        FeatureKind::Permission => match &def.pattern {
            Pattern::Literal(p) => Ok(Trigger::Permission(p.clone())),
            Pattern::Sequence(_) => Err(bad()),
        },
        FeatureKind::PayloadExtension => {
            let scope = *def.scopes.iter().find(|s| s.is_payload()).ok_or_else(bad)?;
            let suffix = match &def.pattern {
                Pattern::Literal(s) => s,
                Pattern::Sequence(_) => return Err(bad()),
            };
            Ok(Trigger::File {
                path: format!("{}/embedded{suffix}", scope.dir_name().ok_or_else(bad)?),
            })
        }
        _ => {
            let scope = *def
                .scopes
                .iter()
                .find(|s| !matches!(s, Scope::Manifest | Scope::Other))
                .ok_or_else(bad)?;
            let body = def.pattern.fragments().join("->");
            Ok(Trigger::Line {
                scope,
                text: format!("    const-string v0, \"{body}\""),
            })
        }
    }
}

/// Whether planting `trigger` makes the detector for `def` fire.
fn fires(trigger: &Trigger, def: &FeatureDef) -> bool {
    match (trigger, def.kind, &def.pattern) {
        (Trigger::Permission(p), FeatureKind::Permission, Pattern::Literal(q)) => p == q,
        (Trigger::Permission(_), _, _) => false,
        (Trigger::File { path }, FeatureKind::PayloadExtension, Pattern::Literal(suffix)) => {
            def.searches(Scope::of(path)) && path.ends_with(suffix.as_str())
        }
        (Trigger::File { .. }, _, _) => false,
        (Trigger::Line { .. }, FeatureKind::Permission | FeatureKind::PayloadExtension, _) => false,
        (Trigger::Line { scope, text }, _, pattern) => def.searches(*scope) && pattern_in(text.as_bytes(), pattern),
    }
}

fn manifest_skeleton(id: &str, permissions: &[&str]) -> String {
    let mut s = format!(
        "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n\
         <manifest xmlns:android=\"http://schemas.android.com/apk/res/android\" package=\"com.example.{id}\">\n"
    );
    for p in permissions {
        s.push_str(&format!("    <uses-permission android:name=\"{p}\"/>\n"));
    }
    s.push_str("    <application android:label=\"app\"/>\n</manifest>\n");
    s
}

const CODE_HEADER: &str =
    ".class public Lcom/example/app/Main;\n.super Ljava/lang/Object;\n\n.method public static run()V\n    .locals 4\n";
const CODE_FOOTER: &str = "    return-void\n.end method\n";

fn filler_line(i: usize) -> String {
    format!("    add-int/lit8 v{}, v{}, 0x{:x}\n", i % 4, (i + 1) % 4, i % 97)
}

/// Fixed text every generated app carries; none of it may fire a feature.
fn check_skeleton(catalog: &FeatureCatalog, filler_lines: usize) -> Result<()> {
    let mut probes = vec![
        (Scope::Code, CODE_HEADER.to_string()),
        (Scope::Code, CODE_FOOTER.to_string()),
    ];
    for i in 0..filler_lines.min(4 * 97) {
        probes.push((Scope::Code, filler_line(i)));
    }
    for def in &catalog.defs {
        if matches!(def.kind, FeatureKind::Permission | FeatureKind::PayloadExtension) {
            continue;
        }
        for (scope, text) in &probes {
            if fires(
                &Trigger::Line {
                    scope: *scope,
                    text: text.clone(),
                },
                def,
            ) {
                return Err(Error::Spec(format!("generated skeleton would trigger `{}`", def.name)));
            }
        }
    }
    Ok(())
}

fn name_key(name: &str) -> u64 {
    // FNV-1a, so planting depends on the feature name and not its position
    name.bytes().fold(0xCBF2_9CE4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01B3)
    })
}

/// Samples receiving each spec entry's trigger, in entry order.
fn plan(
    spec: &FrequencySpec,
    labels: &[ClassLabel],
    defs: &[&FeatureDef],
    triggers: &[Trigger],
) -> Result<Vec<BTreeSet<usize>>> {
    let n = defs.len();
    // implied_by[g] = entries whose trigger fires g
    let implied_by: Vec<Vec<usize>> = (0..n)
        .map(|g| (0..n).filter(|&f| f != g && fires(&triggers[f], defs[g])).collect())
        .collect();

    let mut order = Vec::with_capacity(n);
    let mut done = vec![false; n];
    while order.len() < n {
        let next = (0..n).find(|&g| !done[g] && implied_by[g].iter().all(|&f| done[f]));
        let Some(g) = next else {
            let stuck: Vec<&str> = (0..n).filter(|&g| !done[g]).map(|g| defs[g].name.as_str()).collect();
            return Err(Error::Spec(format!(
                "triggers of {} imply each other and cannot be planted independently",
                stuck.join(", ")
            )));
        };
        done[g] = true;
        order.push(g);
    }

    let mut planted: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for g in order {
        let implied: BTreeSet<usize> = implied_by[g].iter().flat_map(|&f| planted[f].iter().copied()).collect();
        let entry = &spec.entries[g];
        for (ci, class) in ClassLabel::ALL.into_iter().enumerate() {
            let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
            let already = members.iter().filter(|i| implied.contains(i)).count() as u64;
            let target = entry.target(class);
            if target < already {
                return Err(Error::Spec(format!(
                    "feature `{}`: {class} target {target} is below the {already} samples implied by other features",
                    entry.feature
                )));
            }
            let mut free: Vec<usize> = members.into_iter().filter(|i| !implied.contains(i)).collect();
            SplitMix64::keyed(spec.seed ^ PLANT_STREAM, name_key(&entry.feature), ci as u64).shuffle(&mut free);
            planted[g].extend(free.into_iter().take((target - already) as usize));
        }
    }
    Ok(planted)
}

#[derive(Debug, Clone)]
pub struct GeneratedCorpus {
    pub root: PathBuf,
    pub labels_path: PathBuf,
    pub samples: Vec<(String, ClassLabel)>,
}

/// Write `n_ben + n_sus` apps and `labels.csv` under `out`, which must be
/// empty or absent. `filler_lines` inert code lines pad every app.
pub fn generate(
    spec: &FrequencySpec,
    catalog: &FeatureCatalog,
    out: &Path,
    filler_lines: usize,
) -> Result<GeneratedCorpus> {
    spec.validate(catalog)?;
    check_skeleton(catalog, filler_lines)?;
    if out.exists() {
        let mut entries = fs::read_dir(out).map_err(|e| Error::io(out, e))?;
        if entries.next().is_some() {
            return Err(Error::OutputNotEmpty(out.to_path_buf()));
        }
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let total = (spec.n_ben + spec.n_sus) as usize;
    let mut labels: Vec<ClassLabel> = (0..total)
        .map(|i| {
            if (i as u64) < spec.n_ben {
                ClassLabel::Benign
            } else {
                ClassLabel::Suspicious
            }
        })
        .collect();
    SplitMix64::keyed(spec.seed, LABEL_STREAM, 0).shuffle(&mut labels);
    let width = total.saturating_sub(1).to_string().len().max(5);
    let ids: Vec<String> = (0..total).map(|i| format!("app{i:0width$}")).collect();

    let defs: Vec<&FeatureDef> = spec
        .entries
        .iter()
        .map(|e| catalog.get(&e.feature).expect("validated"))
        .collect();
    let triggers: Vec<Trigger> = defs.iter().map(|d| trigger_for(d)).collect::<Result<_>>()?;
    let planted = plan(spec, &labels, &defs, &triggers)?;

    let filler: String = (0..filler_lines).map(filler_line).collect();
    for (i, id) in ids.iter().enumerate() {
        let dir = out.join(id);
        let mut permissions = Vec::new();
        let mut lines: Vec<(Scope, &str)> = Vec::new();
        let mut files = Vec::new();
        for (g, trig) in triggers.iter().enumerate() {
            if !planted[g].contains(&i) {
                continue;
            }
            match trig {
                Trigger::Permission(p) => permissions.push(p.as_str()),
                Trigger::Line { scope, text } => lines.push((*scope, text.as_str())),
                Trigger::File { path } => files.push(path.as_str()),
            }
        }
        write(&dir.join(MANIFEST_FILE), manifest_skeleton(id, &permissions).as_bytes())?;

        let mut code = String::from(CODE_HEADER);
        code.push_str(&filler);
        for (_, text) in lines.iter().filter(|(s, _)| *s == Scope::Code) {
            code.push_str(text);
            code.push('\n');
        }
        code.push_str(CODE_FOOTER);
        write(&dir.join(CODE_FILE), code.as_bytes())?;

        for scope in [Scope::Assets, Scope::Resources, Scope::NativeLib] {
            let body: String = lines
                .iter()
                .filter(|(s, _)| *s == scope)
                .map(|(_, t)| format!("{t}\n"))
                .collect();
            if !body.is_empty() {
                write(&dir.join(line_file(scope)), body.as_bytes())?;
            }
        }
        for path in files {
            write(&dir.join(path), b"")?;
        }
    }

    let labels_path = out.join("labels.csv");
    write_labels(&labels_path, ids.iter().map(String::as_str).zip(labels.iter().copied()))?;
    Ok(GeneratedCorpus {
        root: out.to_path_buf(),
        labels_path,
        samples: ids.into_iter().zip(labels).collect(),
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{builtin_catalog, parse_catalog, CatalogMode};
    use crate::corpus::load_corpus;
    use crate::detectors::extract_corpus;
    use crate::ranking::build_contingency;
    use tempfile::TempDir;

    fn catalog() -> FeatureCatalog {
        parse_catalog(builtin_catalog(), CatalogMode::M).unwrap()
    }

    fn entry(feature: &str, benign: u64, malware: u64) -> FrequencyEntry {
        FrequencyEntry {
            feature: feature.into(),
            benign,
            malware,
        }
    }

    fn recovered(spec: &FrequencySpec, filler: usize) -> Vec<(String, u64, u64)> {
        let cat = catalog();
        let tmp = TempDir::new().unwrap();
        let out = tmp.path().join("corpus");
        let g = generate(spec, &cat, &out, filler).unwrap();
        let corpus = load_corpus(&g.root, Some(&g.labels_path)).unwrap();
        let (m, _) = extract_corpus(&corpus, &cat, 0).unwrap();
        build_contingency(&m)
            .unwrap()
            .into_iter()
            .map(|t| (t.feature, t.ben_pos, t.sus_pos))
            .collect()
    }

    #[test]
    fn table_parsing() {
        let cat = catalog();
        let spec = spec_from_table(
            "feature,benign_count,malware_count\nREAD_SMS,20,591\n",
            &cat,
            1000,
            1000,
            1,
        )
        .unwrap();
        assert_eq!(spec.entries, vec![entry("READ_SMS", 20, 591)]);
        assert!(spec_from_table("", &cat, 10, 10, 1).unwrap().entries.is_empty());
        assert_eq!(
            spec_from_table(TABLE4_CSV, &cat, 1000, 1000, 1).unwrap().entries.len(),
            30
        );
        assert!(matches!(
            spec_from_table("feature,benign_count,malware_count\nNOPE,1,1\n", &cat, 10, 10, 1),
            Err(Error::UnknownFeature(f)) if f == "NOPE"
        ));
        assert!(matches!(
            spec_from_table("feature,benign_count,malware_count\nREAD_SMS,11,1\n", &cat, 10, 10, 1),
            Err(Error::Spec(_))
        ));
    }

    #[test]
    fn mixed_kinds_recovered_exactly() {
        let spec = FrequencySpec {
            n_ben: 30,
            n_sus: 25,
            seed: 3,
            entries: vec![
                entry("READ_SMS", 2, 20),
                entry("chmod", 5, 11),
                entry(".apk", 1, 9),
                entry("Runtime.exec", 4, 4),
                entry("SMSReceiver", 0, 25),
                entry("mount", 10, 12),
                entry("remount", 3, 7),
                entry("/system/bin", 8, 8),
                entry("/system/bin/sh", 8, 2),
            ],
        };
        let got = recovered(&spec, 3);
        for e in &spec.entries {
            let row = got.iter().find(|r| r.0 == e.feature).unwrap();
            assert_eq!((row.1, row.2), (e.benign, e.malware), "{}", e.feature);
        }
        for row in &got {
            if !spec.entries.iter().any(|e| e.feature == row.0) {
                assert_eq!((row.1, row.2), (0, 0), "{} planted by accident", row.0);
            }
        }
    }

    #[test]
    fn all_zero_spec_gives_empty_apps() {
        let spec = FrequencySpec {
            n_ben: 4,
            n_sus: 3,
            seed: 0,
            entries: vec![entry("READ_SMS", 0, 0)],
        };
        assert!(recovered(&spec, 50).iter().all(|r| r.1 == 0 && r.2 == 0));
    }

    #[test]
    fn implied_target_too_small_is_infeasible() {
        let spec = FrequencySpec {
            n_ben: 10,
            n_sus: 10,
            seed: 0,
            entries: vec![entry("mount", 1, 1), entry("remount", 2, 0)],
        };
        let tmp = TempDir::new().unwrap();
        let err = generate(&spec, &catalog(), &tmp.path().join("c"), 0).unwrap_err();
        assert!(matches!(err, Error::Spec(m) if m.contains("mount")));
    }

    #[test]
    fn refuses_non_empty_output() {
        let tmp = TempDir::new().unwrap();
        fs::write(tmp.path().join("keep"), b"x").unwrap();
        let spec = FrequencySpec {
            n_ben: 1,
            n_sus: 1,
            seed: 0,
            entries: vec![],
        };
        assert!(matches!(
            generate(&spec, &catalog(), tmp.path(), 0),
            Err(Error::OutputNotEmpty(_))
        ));
    }

    fn tree(root: &Path) -> Vec<(String, Vec<u8>)> {
        let mut out: Vec<_> = walkdir::WalkDir::new(root)
            .into_iter()
            .map(|e| e.unwrap())
            .filter(|e| e.file_type().is_file())
            .map(|e| {
                let rel = e.path().strip_prefix(root).unwrap().to_string_lossy().into_owned();
                (rel, fs::read(e.path()).unwrap())
            })
            .collect();
        out.sort();
        out
    }

    #[test]
    fn byte_identical_for_same_seed() {
        let cat = catalog();
        let spec = FrequencySpec {
            n_ben: 40,
            n_sus: 40,
            seed: 17,
            entries: vec![
                entry("chmod", 3, 30),
                entry("mount", 5, 9),
                entry("remount", 1, 9),
                entry(".jar", 2, 4),
            ],
        };
        let tmp = TempDir::new().unwrap();
        generate(&spec, &cat, &tmp.path().join("a"), 2).unwrap();
        generate(&spec, &cat, &tmp.path().join("b"), 2).unwrap();
        assert_eq!(tree(&tmp.path().join("a")), tree(&tmp.path().join("b")));
        let mut other = spec.clone();
        other.seed = 18;
        generate(&other, &cat, &tmp.path().join("c"), 2).unwrap();
        assert_ne!(tree(&tmp.path().join("a")), tree(&tmp.path().join("c")));
    }

    #[test]
    fn every_builtin_trigger_fires_only_intended_features() {
        let cat = catalog();
        for def in &cat.defs {
            let t = trigger_for(def).unwrap();
            assert!(fires(&t, def), "{} does not fire itself", def.name);
        }
    }
}
