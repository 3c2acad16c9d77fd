use memchr::memmem;

use super::{Detector, ScanContext};
use crate::catalog::{FeatureDef, FeatureKind, Pattern};

/// Case-sensitive literal match against file contents, one line at a time.
/// Serves API calls, string tokens, system commands, shell paths and intent
/// actions; native libraries are matched as raw bytes.
#[derive(Debug, Clone, Copy, Default)]
pub struct LineTokenDetector;

impl Detector for LineTokenDetector {
    fn name(&self) -> &'static str {
        "line-token"
    }

    fn kinds(&self) -> &'static [FeatureKind] {
        &[
            FeatureKind::ApiCall,
            FeatureKind::StringToken,
            FeatureKind::SystemCommand,
            FeatureKind::ShellPath,
            FeatureKind::IntentAction,
        ]
    }

    fn detect(&self, def: &FeatureDef, ctx: &mut ScanContext<'_>) -> bool {
        def.scopes
            .iter()
            .any(|&scope| ctx.files_in(scope).iter().any(|f| pattern_in(&f.bytes, &def.pattern)))
    }
}

/// True iff some line of `text` contains the pattern: the literal itself,
/// or every fragment of a sequence in order.
pub fn pattern_in(text: &[u8], pattern: &Pattern) -> bool {
    match pattern {
        // patterns never contain a newline, so a whole-buffer hit is a line hit
        Pattern::Literal(lit) => memmem::find(text, lit.as_bytes()).is_some(),
        Pattern::Sequence(frags) => {
            let Some((first, rest)) = frags.split_first() else {
                return false;
            };
            let first = first.as_bytes();
            for start in memmem::find_iter(text, first) {
                let tail = &text[start + first.len()..];
                let line = match memchr::memchr(b'\n', tail) {
                    Some(end) => &tail[..end],
                    None => tail,
                };
                if fragments_in_order(line, rest) {
                    return true;
                }
            }
            false
        }
    }
}

fn fragments_in_order(mut line: &[u8], frags: &[String]) -> bool {
    for frag in frags {
        match memmem::find(line, frag.as_bytes()) {
            Some(pos) => line = &line[pos + frag.len()..],
            None => return false,
        }
    }
    true
}

pub fn detect_code_property(code_unit: &str, def: &FeatureDef) -> bool {
    pattern_in(code_unit.as_bytes(), &def.pattern)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Scope;
    use proptest::prelude::*;

    fn def(pattern: Pattern) -> FeatureDef {
        FeatureDef {
            id: 0,
            name: "x".into(),
            kind: FeatureKind::ApiCall,
            pattern,
            scopes: vec![Scope::Code],
        }
    }

    fn lit(s: &str) -> FeatureDef {
        def(Pattern::Literal(s.into()))
    }

    fn seq(parts: &[&str]) -> FeatureDef {
        def(Pattern::Sequence(parts.iter().map(|s| s.to_string()).collect()))
    }

    #[test]
    fn system_command_in_string_constant() {
        assert!(detect_code_property(
            "    const-string v0, \"chmod 755\"\n",
            &lit("chmod")
        ));
    }

    #[test]
    fn empty_file() {
        assert!(!detect_code_property("", &lit("chmod")));
    }

    #[test]
    fn case_sensitive() {
        assert!(!detect_code_property("CHMOD", &lit("chmod")));
    }

    #[test]
    fn compound_exec_matches_both_surface_forms() {
        let d = seq(&["Runtime", "exec("]);
        // call site as emitted by the disassembler
        let smali = "    invoke-virtual {v0, v1}, Ljava/lang/Runtime;->exec(Ljava/lang/String;)Ljava/lang/Process;";
        assert!(detect_code_property(smali, &d));
        assert!(detect_code_property("Runtime.getRuntime().exec(cmd)", &d));
        assert!(detect_code_property("Runtime;->exec(", &d));
    }

    #[test]
    fn compound_requires_same_line_and_order() {
        let d = seq(&["Runtime", "exec("]);
        assert!(!detect_code_property("Runtime\nexec(", &d));
        assert!(!detect_code_property("exec( Runtime", &d));
        assert!(detect_code_property("exec( Runtime\nRuntime x exec(", &d));
    }

    proptest! {
        #[test]
        fn literal_agrees_with_naive_line_scan(lines in prop::collection::vec("[a-c ]{0,12}", 0..8), pat in "[a-c]{1,3}") {
            let text = lines.join("\n");
            let naive = text.lines().any(|l| l.contains(pat.as_str()));
            prop_assert_eq!(detect_code_property(&text, &lit(&pat)), naive);
        }

        #[test]
        fn sequence_agrees_with_naive_line_scan(lines in prop::collection::vec("[ab ]{0,10}", 0..6), p1 in "[ab]{1,2}", p2 in "[ab]{1,2}") {
            let text = lines.join("\n");
            let naive = text.lines().any(|l| match l.find(p1.as_str()) {
                Some(i) => l[i + p1.len()..].contains(p2.as_str()),
                None => false,
            });
            prop_assert_eq!(detect_code_property(&text, &seq(&[&p1, &p2])), naive);
        }
    }
}
