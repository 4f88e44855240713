//! Backtick-macro preprocessing: `` `define `` collection and token
//! substitution. Function-like macros and conditionals are out of scope;
//! undefined macro uses stay in the stream as opaque identifiers so the
//! parser can keep going.

use std::collections::BTreeMap;

use crate::diag::{Diagnostic, RuleCode};
use crate::token::{Token, TokenKind};

/// Maximum nesting of macro-in-macro expansion before giving up.
pub const MAX_EXPANSION_DEPTH: usize = 16;

/// Macros known at the end of preprocessing, in definition-name order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MacroTable {
    defs: BTreeMap<String, Vec<Token>>,
}

impl MacroTable {
    pub fn define(&mut self, name: impl Into<String>, body: Vec<Token>) {
        self.defs.insert(name.into(), body);
    }

    pub fn get(&self, name: &str) -> Option<&[Token]> {
        self.defs.get(name).map(|v| v.as_slice())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.defs.keys().map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.defs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }
}

pub struct PreprocessResult {
    pub tokens: Vec<Token>,
    pub macros: MacroTable,
    pub diagnostics: Vec<Diagnostic>,
}

pub fn preprocess(tokens: Vec<Token>, predefined: &MacroTable) -> PreprocessResult {
    let mut macros = predefined.clone();
    let mut out = Vec::with_capacity(tokens.len());
    let mut diagnostics = Vec::new();
    let mut i = 0usize;

    while i < tokens.len() {
        let tok = &tokens[i];
        match &tok.kind {
            TokenKind::Directive { name } if name == "define" => {
                i += 1;
                let Some(name_tok) = tokens.get(i).filter(|t| {
                    t.kind == TokenKind::Ident && t.span.line == tok.span.line
                }) else {
                    diagnostics.push(
                        Diagnostic::new(RuleCode::Syn000, tok.span, "`define without a macro name"),
                    );
                    continue;
                };
                let macro_name = name_tok.text.clone();
                let def_line = name_tok.span.line;
                i += 1;
                // Replacement: remaining tokens on the same line.
                let mut body = Vec::new();
                while i < tokens.len() && tokens[i].span.line == def_line {
                    body.push(tokens[i].clone());
                    i += 1;
                }
                macros.define(macro_name, body);
            }
            TokenKind::Directive { name } => {
                diagnostics.push(
                    Diagnostic::new(
                        RuleCode::Syn004,
                        tok.span,
                        format!("directive `{name} is not supported and was ignored"),
                    )
                    .with_hint("only `define is interpreted"),
                );
                // Line-oriented directives swallow the rest of their line.
                let line = tok.span.line;
                i += 1;
                if matches!(name.as_str(), "timescale" | "include" | "default_nettype" | "undef") {
                    while i < tokens.len() && tokens[i].span.line == line {
                        i += 1;
                    }
                }
            }
            TokenKind::MacroUse { name } => {
                expand_use(tok, name, &macros, 0, &mut out, &mut diagnostics);
                i += 1;
            }
            _ => {
                out.push(tok.clone());
                i += 1;
            }
        }
    }

    PreprocessResult { tokens: out, macros, diagnostics }
}

fn expand_use(
    use_tok: &Token,
    name: &str,
    macros: &MacroTable,
    depth: usize,
    out: &mut Vec<Token>,
    diagnostics: &mut Vec<Diagnostic>,
) {
    if depth >= MAX_EXPANSION_DEPTH {
        diagnostics.push(
            Diagnostic::new(
                RuleCode::Syn003,
                use_tok.span,
                format!("macro `{name} expands recursively beyond depth {MAX_EXPANSION_DEPTH}"),
            )
            .with_hint("break the definition cycle"),
        );
        out.push(opaque(use_tok));
        return;
    }
    match macros.get(name) {
        Some(body) => {
            let body = body.to_vec();
            for t in &body {
                if let TokenKind::MacroUse { name: inner } = &t.kind {
                    expand_use(t, &inner.clone(), macros, depth + 1, out, diagnostics);
                } else {
                    out.push(t.clone());
                }
            }
        }
        None => {
            diagnostics.push(
                Diagnostic::new(
                    RuleCode::Syn002,
                    use_tok.span,
                    format!("undefined macro `{name}`"),
                )
                .with_hint(format!("add ``define {name} ...`` or remove the use")),
            );
            out.push(opaque(use_tok));
        }
    }
}

/// An undefined or over-deep macro use is kept as an opaque identifier,
/// backtick included, so downstream phases see a placeholder name.
fn opaque(tok: &Token) -> Token {
    Token { kind: TokenKind::Ident, text: tok.text.clone(), span: tok.span }
}
