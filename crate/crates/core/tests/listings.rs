//! Lint fidelity on the four canonical broken snippets plus cleanliness of
//! the reference PWM corpus.

use hdlv_core::diag::Severity;
use hdlv_core::lint::{build_drive_map, lint, LintConfig};
use hdlv_core::parser::{parse_text, ParseResult};
use hdlv_core::{RuleCode, SourceMap};

fn corpus_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn lint_file(rel: &str) -> (SourceMap, Vec<hdlv_core::Diagnostic>) {
    let path = corpus_dir().join(rel);
    let text = std::fs::read_to_string(&path).expect("fixture readable");
    let mut sm = SourceMap::new();
    let pr = parse_text(&mut sm, rel, &text);
    let files = [&pr];
    let map = build_drive_map(&files);
    (sm, lint(&files, &map, &LintConfig::new()))
}

fn llm_errors(diags: &[hdlv_core::Diagnostic]) -> Vec<RuleCode> {
    diags
        .iter()
        .filter(|d| d.severity == Severity::Error && d.rule.as_str().starts_with("LLM"))
        .map(|d| d.rule)
        .collect()
}

#[test]
fn listing1_yields_llm001_at_the_brace() {
    let (_, diags) = lint_file("listings/listing1.v");
    let hits: Vec<_> = diags.iter().filter(|d| d.rule == RuleCode::Llm001).collect();
    assert_eq!(hits.len(), 1, "{diags:?}");
    assert_eq!((hits[0].span.line, hits[0].span.col), (2, 1));
    assert_eq!(llm_errors(&diags), vec![RuleCode::Llm001]);
}

#[test]
fn listing2_yields_llm002_at_the_end() {
    let (_, diags) = lint_file("listings/listing2.v");
    let hits: Vec<_> = diags.iter().filter(|d| d.rule == RuleCode::Llm002).collect();
    assert_eq!(hits.len(), 1, "{diags:?}");
    assert_eq!((hits[0].span.line, hits[0].span.col), (4, 1));
    assert_eq!(llm_errors(&diags), vec![RuleCode::Llm002]);
}

#[test]
fn listing3_yields_llm003_on_out() {
    let (_, diags) = lint_file("listings/listing3.v");
    let hits: Vec<_> = diags.iter().filter(|d| d.rule == RuleCode::Llm003).collect();
    assert_eq!(hits.len(), 1, "{diags:?}");
    assert!(hits[0].message.contains("out"));
    assert_eq!(hits[0].span.line, 4);
    assert_eq!(hits[0].related.len(), 3);
    // No error-severity LLM diagnostics of any other code.
    assert!(llm_errors(&diags).is_empty(), "{diags:?}");
}

#[test]
fn listing4_yields_llm004_at_the_trailing_assign() {
    let (_, diags) = lint_file("listings/listing4.v");
    let hits: Vec<_> = diags.iter().filter(|d| d.rule == RuleCode::Llm004).collect();
    assert_eq!(hits.len(), 1, "{diags:?}");
    assert_eq!((hits[0].span.line, hits[0].span.col), (7, 3));
    assert_eq!(llm_errors(&diags), vec![RuleCode::Llm004]);
}

#[test]
fn pwm_corpus_is_clean() {
    let dir = corpus_dir().join("pwm");
    let mut sm = SourceMap::new();
    let mut parsed: Vec<ParseResult> = Vec::new();
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) == Some("v") {
            let text = std::fs::read_to_string(&path).unwrap();
            let name = path.file_name().unwrap().to_string_lossy().to_string();
            parsed.push(parse_text(&mut sm, &name, &text));
        }
    }
    assert_eq!(parsed.len(), 7, "expected the 7-module corpus");
    let refs: Vec<&ParseResult> = parsed.iter().collect();
    let map = build_drive_map(&refs);
    let diags = lint(&refs, &map, &LintConfig::new());
    assert!(
        !diags.iter().any(|d| d.severity == Severity::Error),
        "corpus must be error-free: {diags:#?}"
    );
    // It is warning-free too.
    assert!(diags.is_empty(), "corpus should lint fully clean: {diags:#?}");
}

#[test]
fn file_order_does_not_change_per_file_diagnostics() {
    let dir = corpus_dir().join("listings");
    let mut order_a = Vec::new();
    let mut sm_a = SourceMap::new();
    for name in ["listing1.v", "listing3.v"] {
        let text = std::fs::read_to_string(dir.join(name)).unwrap();
        order_a.push(parse_text(&mut sm_a, name, &text));
    }
    let mut order_b = Vec::new();
    let mut sm_b = SourceMap::new();
    for name in ["listing3.v", "listing1.v"] {
        let text = std::fs::read_to_string(dir.join(name)).unwrap();
        order_b.push(parse_text(&mut sm_b, name, &text));
    }
    let refs_a: Vec<&ParseResult> = order_a.iter().collect();
    let refs_b: Vec<&ParseResult> = order_b.iter().collect();
    let diags_a = lint(&refs_a, &build_drive_map(&refs_a), &LintConfig::new());
    let diags_b = lint(&refs_b, &build_drive_map(&refs_b), &LintConfig::new());
    let per_file = |diags: &[hdlv_core::Diagnostic], sm: &SourceMap, name: &str| -> Vec<String> {
        diags
            .iter()
            .filter(|d| sm.file_name(d.span.file) == name)
            .map(|d| format!("{}:{}:{} {}", d.rule, d.span.line, d.span.col, d.message))
            .collect()
    };
    for name in ["listing1.v", "listing3.v"] {
        assert_eq!(per_file(&diags_a, &sm_a, name), per_file(&diags_b, &sm_b, name));
    }
}
