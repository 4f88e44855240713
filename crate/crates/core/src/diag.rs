//! Diagnostics: rule codes, severities, and the text/JSON renderers shared by
//! every analysis phase.

use std::fmt;

use serde_json::json;

use crate::source::{SourceMap, Span};

/// Every diagnostic carries one of these codes. The `LLM` family covers the
/// defect classes common in generated Verilog, `SYN` covers frontend
/// problems, `HC` hierarchy conformance, and `SIM` simulation mismatches fed
/// back by the orchestrator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RuleCode {
    /// Generic syntax error from parse recovery.
    Syn000,
    /// Identifier reference with no visible declaration.
    Syn001,
    /// Use of an undefined macro.
    Syn002,
    /// Macro expansion exceeded the recursion limit.
    Syn003,
    /// Construct accepted but ignored (directives, odd sensitivity lists).
    Syn004,
    /// Diagnostic flood: analysis stopped early.
    Syn999,
    /// begin block closed by `}` or never closed.
    Llm001,
    /// case block terminated without `endcase`.
    Llm002,
    /// Signal driven from more than one place.
    Llm003,
    /// Multi-edge sensitivity list with logic outside the reset guard.
    Llm004,
    /// Combinational block leaves a signal unassigned on some path.
    Llm005,
    /// Combinational case without default and non-exhaustive labels.
    Llm006,
    /// Non-synthesizable construct (initial block, delay).
    Llm007,
    /// Module declared in the manifest but missing from the sources.
    Hc001,
    /// Port name/direction/width deviates from the manifest.
    Hc002,
    /// Instance set deviates from the manifest.
    Hc003,
    /// Source module not declared in the manifest.
    Hc004,
    /// Clock/reset usage does not follow the manifest conventions.
    Hc005,
    /// Simulated behavior differs from the golden reference.
    Sim001,
}

impl RuleCode {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleCode::Syn000 => "SYN000",
            RuleCode::Syn001 => "SYN001",
            RuleCode::Syn002 => "SYN002",
            RuleCode::Syn003 => "SYN003",
            RuleCode::Syn004 => "SYN004",
            RuleCode::Syn999 => "SYN999",
            RuleCode::Llm001 => "LLM001",
            RuleCode::Llm002 => "LLM002",
            RuleCode::Llm003 => "LLM003",
            RuleCode::Llm004 => "LLM004",
            RuleCode::Llm005 => "LLM005",
            RuleCode::Llm006 => "LLM006",
            RuleCode::Llm007 => "LLM007",
            RuleCode::Hc001 => "HC001",
            RuleCode::Hc002 => "HC002",
            RuleCode::Hc003 => "HC003",
            RuleCode::Hc004 => "HC004",
            RuleCode::Hc005 => "HC005",
            RuleCode::Sim001 => "SIM001",
        }
    }

    pub fn parse(s: &str) -> Option<RuleCode> {
        let all = [
            RuleCode::Syn000,
            RuleCode::Syn001,
            RuleCode::Syn002,
            RuleCode::Syn003,
            RuleCode::Syn004,
            RuleCode::Syn999,
            RuleCode::Llm001,
            RuleCode::Llm002,
            RuleCode::Llm003,
            RuleCode::Llm004,
            RuleCode::Llm005,
            RuleCode::Llm006,
            RuleCode::Llm007,
            RuleCode::Hc001,
            RuleCode::Hc002,
            RuleCode::Hc003,
            RuleCode::Hc004,
            RuleCode::Hc005,
            RuleCode::Sim001,
        ];
        let up = s.to_ascii_uppercase();
        all.into_iter().find(|c| c.as_str() == up)
    }

    pub fn default_severity(self) -> Severity {
        match self {
            RuleCode::Syn000
            | RuleCode::Syn003
            | RuleCode::Syn999
            | RuleCode::Llm001
            | RuleCode::Llm002
            | RuleCode::Llm003
            | RuleCode::Llm004
            | RuleCode::Hc001
            | RuleCode::Hc002
            | RuleCode::Hc003
            | RuleCode::Hc005
            | RuleCode::Sim001 => Severity::Error,
            RuleCode::Syn001
            | RuleCode::Syn002
            | RuleCode::Syn004
            | RuleCode::Llm005
            | RuleCode::Llm006
            | RuleCode::Llm007
            | RuleCode::Hc004 => Severity::Warning,
        }
    }
}

impl fmt::Display for RuleCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

impl Severity {
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Warning => "warning",
            Severity::Error => "error",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelatedSpan {
    pub span: Span,
    pub note: String,
}

/// One finding. `expected`/`found` carry the parser's recovery structure so
/// the lint pass can re-tag matching recovery events; both are folded into
/// `hint` when rendered.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub rule: RuleCode,
    pub severity: Severity,
    pub span: Span,
    pub message: String,
    pub hint: Option<String>,
    pub related: Vec<RelatedSpan>,
    pub expected: Option<String>,
    pub found: Option<String>,
}

impl Diagnostic {
    pub fn new(rule: RuleCode, span: Span, message: impl Into<String>) -> Diagnostic {
        Diagnostic {
            rule,
            severity: rule.default_severity(),
            span,
            message: message.into(),
            hint: None,
            related: Vec::new(),
            expected: None,
            found: None,
        }
    }

    pub fn with_hint(mut self, hint: impl Into<String>) -> Diagnostic {
        self.hint = Some(hint.into());
        self
    }

    pub fn with_severity(mut self, severity: Severity) -> Diagnostic {
        self.severity = severity;
        self
    }

    pub fn with_related(mut self, span: Span, note: impl Into<String>) -> Diagnostic {
        self.related.push(RelatedSpan { span, note: note.into() });
        self
    }

    /// Recovery event: records what the parser wanted and what it saw.
    pub fn with_expectation(
        mut self,
        expected: impl Into<String>,
        found: impl Into<String>,
    ) -> Diagnostic {
        let expected = expected.into();
        let found = found.into();
        if self.hint.is_none() {
            self.hint = Some(format!("expected `{expected}`, found `{found}`"));
        }
        self.expected = Some(expected);
        self.found = Some(found);
        self
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

/// Canonical ordering: (file, start offset, rule code).
pub fn sort_diagnostics(diags: &mut [Diagnostic]) {
    diags.sort_by(|a, b| {
        (a.span.file, a.span.start, a.rule.as_str()).cmp(&(b.span.file, b.span.start, b.rule.as_str()))
    });
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderFormat {
    Text,
    Json,
}

/// One line per diagnostic: `file:line:col: severity[CODE] message`.
pub fn render_text(diags: &[Diagnostic], sm: &SourceMap) -> String {
    let mut out = String::new();
    for d in diags {
        out.push_str(&render_line(d, sm));
        out.push('\n');
    }
    out
}

pub fn render_line(d: &Diagnostic, sm: &SourceMap) -> String {
    format!(
        "{}:{}:{}: {}[{}] {}",
        sm.file_name(d.span.file),
        d.span.line,
        d.span.col,
        d.severity,
        d.rule,
        d.message
    )
}

pub fn to_json_value(d: &Diagnostic, sm: &SourceMap) -> serde_json::Value {
    let (end_line, end_col) = sm.line_col(d.span.file, d.span.end);
    json!({
        "rule": d.rule.as_str(),
        "severity": d.severity.as_str(),
        "file": sm.file_name(d.span.file),
        "start": {"line": d.span.line, "col": d.span.col},
        "end": {"line": end_line, "col": end_col},
        "message": d.message,
        "hint": d.hint,
        "related": d.related.iter().map(|r| {
            let (rel, rec) = (r.span.line, r.span.col);
            let (rel_end, rec_end) = sm.line_col(r.span.file, r.span.end);
            json!({
                "file": sm.file_name(r.span.file),
                "start": {"line": rel, "col": rec},
                "end": {"line": rel_end, "col": rec_end},
                "note": r.note,
            })
        }).collect::<Vec<_>>(),
    })
}

pub fn render_json(diags: &[Diagnostic], sm: &SourceMap) -> String {
    let arr: Vec<_> = diags.iter().map(|d| to_json_value(d, sm)).collect();
    let mut s = serde_json::to_string_pretty(&arr).expect("diagnostic json");
    s.push('\n');
    s
}

/// Renders in the requested format; the byte-oriented signature matches what
/// the CLI writes to stdout or a file.
pub fn render_diagnostics(diags: &[Diagnostic], sm: &SourceMap, format: RenderFormat) -> Vec<u8> {
    match format {
        RenderFormat::Text => render_text(diags, sm).into_bytes(),
        RenderFormat::Json => render_json(diags, sm).into_bytes(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_render_empty() {
        let sm = SourceMap::new();
        assert_eq!(render_text(&[], &sm), "");
    }

    #[test]
    fn text_render_one_line() {
        let mut sm = SourceMap::new();
        let f = sm.add_file("x.v", "always @(*)begin\n}\n");
        let d = Diagnostic::new(RuleCode::Llm001, sm.span(f, 17, 18), "begin closed with `}`");
        let s = render_text(&[d], &sm);
        assert_eq!(s, "x.v:2:1: error[LLM001] begin closed with `}`\n");
    }

    #[test]
    fn json_fields() {
        let mut sm = SourceMap::new();
        let f = sm.add_file("x.v", "wire a;\n");
        let d = Diagnostic::new(RuleCode::Llm003, sm.span(f, 5, 6), "multi-driven")
            .with_hint("keep one driver")
            .with_related(sm.span(f, 5, 6), "other driver here");
        let v: serde_json::Value = serde_json::from_str(&render_json(&[d], &sm)).unwrap();
        assert_eq!(v[0]["rule"], "LLM003");
        assert_eq!(v[0]["severity"], "error");
        assert_eq!(v[0]["start"]["line"], 1);
        assert_eq!(v[0]["start"]["col"], 6);
        assert_eq!(v[0]["related"][0]["note"], "other driver here");
    }

    #[test]
    fn ordering() {
        let mut sm = SourceMap::new();
        let f = sm.add_file("x.v", "aaaa\n");
        let mut ds = vec![
            Diagnostic::new(RuleCode::Syn000, sm.span(f, 2, 3), "b"),
            Diagnostic::new(RuleCode::Llm002, sm.span(f, 0, 1), "a2"),
            Diagnostic::new(RuleCode::Llm001, sm.span(f, 0, 1), "a1"),
        ];
        sort_diagnostics(&mut ds);
        assert_eq!(ds[0].rule, RuleCode::Llm001);
        assert_eq!(ds[1].rule, RuleCode::Llm002);
        assert_eq!(ds[2].rule, RuleCode::Syn000);
    }

    #[test]
    fn rule_code_roundtrip() {
        assert_eq!(RuleCode::parse("llm003"), Some(RuleCode::Llm003));
        assert_eq!(RuleCode::parse("HC005"), Some(RuleCode::Hc005));
        assert_eq!(RuleCode::parse("NOPE"), None);
    }
}
