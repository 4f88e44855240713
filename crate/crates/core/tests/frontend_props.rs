//! Property tests for the frontend: total tokenization with exact byte
//! coverage, and parser recovery that never drops a trailing well-formed
//! module.

use proptest::prelude::*;

use hdlv_core::parser::parse_text;
use hdlv_core::token::tokenize;
use hdlv_core::SourceMap;

proptest! {
    /// Tokenize is total and covers every input byte exactly once between
    /// tokens and trivia, for arbitrary (printable-ish) input.
    #[test]
    fn token_coverage_tiles_arbitrary_input(src in "[ -~\n\t]{0,200}") {
        let mut sm = SourceMap::new();
        let f = sm.add_file("junk.v", src.clone());
        let r = tokenize(&sm, f);
        let mut pieces: Vec<(u32, u32)> = r
            .tokens
            .iter()
            .map(|t| (t.span.start, t.span.end))
            .chain(r.trivia.iter().map(|s| (s.start, s.end)))
            .collect();
        pieces.sort();
        let mut cursor = 0u32;
        for (s, e) in pieces {
            prop_assert_eq!(s, cursor, "gap or overlap at {}", cursor);
            prop_assert!(e >= s);
            cursor = e;
        }
        prop_assert_eq!(cursor as usize, src.len());
        // Token texts are exact source slices.
        for t in &r.tokens {
            prop_assert_eq!(
                &src[t.span.start as usize..t.span.end as usize],
                t.text.as_str()
            );
        }
    }

    /// Appending a well-formed module after arbitrary malformed text always
    /// yields an Ast containing that module.
    #[test]
    fn recovery_keeps_trailing_module(junk in "[ -~\n]{0,120}") {
        let src = format!(
            "{junk}\nmodule survivor(input wire a, output wire y);\nassign y = ~a;\nendmodule\n"
        );
        let mut sm = SourceMap::new();
        let pr = parse_text(&mut sm, "mixed.v", &src);
        prop_assert!(
            pr.ast.modules.iter().any(|m| m.name == "survivor"),
            "module lost after junk {junk:?}: modules = {:?}",
            pr.ast.modules.iter().map(|m| &m.name).collect::<Vec<_>>()
        );
    }

    /// Determinism: the same input always produces the same diagnostics and
    /// structure.
    #[test]
    fn parse_is_deterministic(src in "[ -~\n]{0,150}") {
        let mut sm_a = SourceMap::new();
        let a = parse_text(&mut sm_a, "a.v", &src);
        let mut sm_b = SourceMap::new();
        let b = parse_text(&mut sm_b, "a.v", &src);
        prop_assert_eq!(a.diagnostics, b.diagnostics);
        prop_assert!(hdlv_core::structural_eq(&a.ast, &b.ast));
    }
}

/// The concurrency contract: analysis results are plain values that can
/// cross threads, and an elaborated design is shareable across parallel
/// runs.
#[test]
fn results_are_send_and_sync() {
    fn check<T: Send + Sync>() {}
    check::<hdlv_core::ParseResult>();
    check::<hdlv_core::Trace>();
    check::<hdlv_core::ElaboratedDesign>();
    check::<hdlv_core::DesignManifest>();
    check::<hdlv_core::Diagnostic>();
    check::<hdlv_core::SessionLog>();
}
