//! Tokenizer for the supported Verilog subset.
//!
//! Total function: every byte of input lands in exactly one token or one
//! trivia span (whitespace/comments); unknown characters become `Unknown`
//! tokens with a diagnostic instead of aborting.

use serde::Serialize;

use crate::diag::{Diagnostic, RuleCode};
use crate::source::{FileId, SourceMap, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Keyword {
    Module,
    Endmodule,
    Input,
    Output,
    Inout,
    Wire,
    Reg,
    Assign,
    Always,
    Initial,
    Begin,
    End,
    If,
    Else,
    Case,
    Casez,
    Casex,
    Endcase,
    Default,
    Posedge,
    Negedge,
    Or,
    Parameter,
    Localparam,
    Signed,
    Generate,
    Endgenerate,
    Function,
    Endfunction,
    Task,
    Endtask,
}

impl Keyword {
    pub fn as_str(self) -> &'static str {
        match self {
            Keyword::Module => "module",
            Keyword::Endmodule => "endmodule",
            Keyword::Input => "input",
            Keyword::Output => "output",
            Keyword::Inout => "inout",
            Keyword::Wire => "wire",
            Keyword::Reg => "reg",
            Keyword::Assign => "assign",
            Keyword::Always => "always",
            Keyword::Initial => "initial",
            Keyword::Begin => "begin",
            Keyword::End => "end",
            Keyword::If => "if",
            Keyword::Else => "else",
            Keyword::Case => "case",
            Keyword::Casez => "casez",
            Keyword::Casex => "casex",
            Keyword::Endcase => "endcase",
            Keyword::Default => "default",
            Keyword::Posedge => "posedge",
            Keyword::Negedge => "negedge",
            Keyword::Or => "or",
            Keyword::Parameter => "parameter",
            Keyword::Localparam => "localparam",
            Keyword::Signed => "signed",
            Keyword::Generate => "generate",
            Keyword::Endgenerate => "endgenerate",
            Keyword::Function => "function",
            Keyword::Endfunction => "endfunction",
            Keyword::Task => "task",
            Keyword::Endtask => "endtask",
        }
    }

    fn from_str(s: &str) -> Option<Keyword> {
        Some(match s {
            "module" => Keyword::Module,
            "endmodule" => Keyword::Endmodule,
            "input" => Keyword::Input,
            "output" => Keyword::Output,
            "inout" => Keyword::Inout,
            "wire" => Keyword::Wire,
            "reg" => Keyword::Reg,
            "assign" => Keyword::Assign,
            "always" => Keyword::Always,
            "initial" => Keyword::Initial,
            "begin" => Keyword::Begin,
            "end" => Keyword::End,
            "if" => Keyword::If,
            "else" => Keyword::Else,
            "case" => Keyword::Case,
            "casez" => Keyword::Casez,
            "casex" => Keyword::Casex,
            "endcase" => Keyword::Endcase,
            "default" => Keyword::Default,
            "posedge" => Keyword::Posedge,
            "negedge" => Keyword::Negedge,
            "or" => Keyword::Or,
            "parameter" => Keyword::Parameter,
            "localparam" => Keyword::Localparam,
            "signed" => Keyword::Signed,
            "generate" => Keyword::Generate,
            "endgenerate" => Keyword::Endgenerate,
            "function" => Keyword::Function,
            "endfunction" => Keyword::Endfunction,
            "task" => Keyword::Task,
            "endtask" => Keyword::Endtask,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Base {
    Bin,
    Oct,
    Dec,
    Hex,
}

impl Base {
    pub fn radix(self) -> u32 {
        match self {
            Base::Bin => 2,
            Base::Oct => 8,
            Base::Dec => 10,
            Base::Hex => 16,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Base::Bin => 'b',
            Base::Oct => 'o',
            Base::Dec => 'd',
            Base::Hex => 'h',
        }
    }
}

/// A number literal. `digits` is the normalized digit string (lowercase, no
/// underscores) so that x/z digits survive re-emission; `value` maps x/z to 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Number {
    /// Declared width for sized literals, `None` for plain decimals.
    pub width: Option<u32>,
    pub base: Base,
    pub digits: String,
    pub value: u64,
    pub has_xz: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum TokenKind {
    Keyword(Keyword),
    Ident,
    Number(Number),
    /// Multi- or single-character operator; the text is authoritative.
    Operator,
    /// Single punctuation character: `( ) [ ] { } ; , . : @ # =` and `?`.
    Punct,
    /// Backtick use of a macro, e.g. `` `STATU1 `` (name without backtick).
    MacroUse { name: String },
    /// Backtick compiler directive, e.g. `` `define ``.
    Directive { name: String },
    Str,
    Unknown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub span: Span,
}

impl Token {
    pub fn is_keyword(&self, k: Keyword) -> bool {
        self.kind == TokenKind::Keyword(k)
    }

    pub fn is_punct(&self, c: char) -> bool {
        self.kind == TokenKind::Punct && self.text.starts_with(c)
    }

    pub fn is_op(&self, s: &str) -> bool {
        self.kind == TokenKind::Operator && self.text == s
    }

    /// Short description for "found ..." diagnostics.
    pub fn describe(&self) -> String {
        match &self.kind {
            TokenKind::Keyword(k) => k.as_str().to_string(),
            _ => self.text.clone(),
        }
    }
}

pub struct TokenizeResult {
    pub tokens: Vec<Token>,
    /// Whitespace and comment spans, in source order.
    pub trivia: Vec<Span>,
    pub diagnostics: Vec<Diagnostic>,
}

const OPERATORS: &[&str] = &[
    "===", "!==", "<<<", ">>>", "&&", "||", "==", "!=", "<=", ">=", "<<", ">>", "~&", "~|", "~^",
    "+", "-", "*", "/", "%", "!", "~", "&", "|", "^", "<", ">",
];

const PUNCT: &str = "()[]{};,.:@#=?";

pub fn tokenize(sm: &SourceMap, file: FileId) -> TokenizeResult {
    let text = sm.text(file);
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut trivia = Vec::new();
    let mut diagnostics = Vec::new();
    let mut i = 0usize;

    let push_trivia = |start: usize, end: usize, trivia: &mut Vec<Span>| {
        if end > start {
            trivia.push(sm.span(file, start as u32, end as u32));
        }
    };

    while i < bytes.len() {
        let c = bytes[i] as char;

        // Whitespace run.
        if c.is_ascii_whitespace() {
            let start = i;
            while i < bytes.len() && (bytes[i] as char).is_ascii_whitespace() {
                i += 1;
            }
            push_trivia(start, i, &mut trivia);
            continue;
        }

        // Comments.
        if c == '/' && i + 1 < bytes.len() {
            if bytes[i + 1] == b'/' {
                let start = i;
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                push_trivia(start, i, &mut trivia);
                continue;
            }
            if bytes[i + 1] == b'*' {
                let start = i;
                i += 2;
                let mut closed = false;
                while i + 1 < bytes.len() {
                    if bytes[i] == b'*' && bytes[i + 1] == b'/' {
                        i += 2;
                        closed = true;
                        break;
                    }
                    i += 1;
                }
                if !closed {
                    // Degrade to a line comment so one stray `/*` cannot
                    // swallow the rest of the file; later lines re-lex.
                    i = start;
                    while i < bytes.len() && bytes[i] != b'\n' {
                        i += 1;
                    }
                    diagnostics.push(Diagnostic::new(
                        RuleCode::Syn000,
                        sm.span(file, start as u32, i as u32),
                        "unterminated block comment",
                    ));
                }
                push_trivia(start, i, &mut trivia);
                continue;
            }
        }

        // Identifiers and keywords.
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() {
                let c = bytes[i] as char;
                if c.is_ascii_alphanumeric() || c == '_' || c == '$' {
                    i += 1;
                } else {
                    break;
                }
            }
            let word = &text[start..i];
            // A sized literal may start with its width: `8'hFF`.
            let kind = match Keyword::from_str(word) {
                Some(k) => TokenKind::Keyword(k),
                None => TokenKind::Ident,
            };
            tokens.push(Token {
                kind,
                text: word.to_string(),
                span: sm.span(file, start as u32, i as u32),
            });
            continue;
        }

        // System identifiers like $display.
        if c == '$' {
            let start = i;
            i += 1;
            while i < bytes.len() {
                let c = bytes[i] as char;
                if c.is_ascii_alphanumeric() || c == '_' || c == '$' {
                    i += 1;
                } else {
                    break;
                }
            }
            tokens.push(Token {
                kind: TokenKind::Ident,
                text: text[start..i].to_string(),
                span: sm.span(file, start as u32, i as u32),
            });
            continue;
        }

        // Numbers: `42`, `8'hFF`, `'b01`. A width already tokenized as a
        // plain decimal gets merged when the `'` shows up.
        if c.is_ascii_digit() || c == '\'' {
            let start = i;
            // Leading decimal digits (width or plain value).
            while i < bytes.len() && ((bytes[i] as char).is_ascii_digit() || bytes[i] == b'_') {
                i += 1;
            }
            let dec_end = i;
            if i < bytes.len() && bytes[i] == b'\'' && i + 1 < bytes.len() {
                let base = match bytes[i + 1].to_ascii_lowercase() as char {
                    'b' => Some(Base::Bin),
                    'o' => Some(Base::Oct),
                    'd' => Some(Base::Dec),
                    'h' => Some(Base::Hex),
                    _ => None,
                };
                if let Some(base) = base {
                    i += 2;
                    let digits_start = i;
                    while i < bytes.len() {
                        let c = (bytes[i] as char).to_ascii_lowercase();
                        let ok = match base {
                            Base::Bin => matches!(c, '0' | '1' | 'x' | 'z' | '?' | '_'),
                            Base::Oct => matches!(c, '0'..='7' | 'x' | 'z' | '?' | '_'),
                            Base::Dec => c.is_ascii_digit() || c == '_',
                            Base::Hex => c.is_ascii_hexdigit() || matches!(c, 'x' | 'z' | '?' | '_'),
                        };
                        if ok {
                            i += 1;
                        } else {
                            break;
                        }
                    }
                    let raw_width = text[start..dec_end].replace('_', "");
                    let width = if raw_width.is_empty() {
                        None
                    } else {
                        Some(raw_width.parse::<u32>().unwrap_or(u32::MAX))
                    };
                    let raw_digits: String = text[digits_start..i]
                        .chars()
                        .filter(|&c| c != '_')
                        .map(|c| c.to_ascii_lowercase())
                        .collect();
                    let span = sm.span(file, start as u32, i as u32);
                    if raw_digits.is_empty() {
                        diagnostics.push(
                            Diagnostic::new(RuleCode::Syn000, span, "based literal has no digits"),
                        );
                    }
                    let has_xz = raw_digits.chars().any(|c| matches!(c, 'x' | 'z' | '?'));
                    let value = parse_digits(&raw_digits, base);
                    // Sized literals default to 32 bits when the width is
                    // omitted, matching common tool behavior.
                    tokens.push(Token {
                        kind: TokenKind::Number(Number {
                            width: Some(width.unwrap_or(32)),
                            base,
                            digits: if raw_digits.is_empty() { "0".to_string() } else { raw_digits },
                            value,
                            has_xz,
                        }),
                        text: text[start..i].to_string(),
                        span,
                    });
                    continue;
                }
            }
            if dec_end > start {
                // Plain decimal.
                let raw = text[start..dec_end].replace('_', "");
                let value = raw.parse::<u64>().unwrap_or(u64::MAX);
                tokens.push(Token {
                    kind: TokenKind::Number(Number {
                        width: None,
                        base: Base::Dec,
                        digits: raw,
                        value,
                        has_xz: false,
                    }),
                    text: text[start..dec_end].to_string(),
                    span: sm.span(file, start as u32, dec_end as u32),
                });
                i = dec_end;
                continue;
            }
            // A lone apostrophe.
            let span = sm.span(file, start as u32, start as u32 + 1);
            diagnostics.push(Diagnostic::new(RuleCode::Syn000, span, "unexpected character `'`"));
            tokens.push(Token { kind: TokenKind::Unknown, text: "'".to_string(), span });
            i = start + 1;
            continue;
        }

        // Backtick: directive or macro use.
        if c == '`' {
            let start = i;
            i += 1;
            while i < bytes.len() {
                let c = bytes[i] as char;
                if c.is_ascii_alphanumeric() || c == '_' {
                    i += 1;
                } else {
                    break;
                }
            }
            let name = &text[start + 1..i];
            let span = sm.span(file, start as u32, i as u32);
            if name.is_empty() {
                diagnostics.push(Diagnostic::new(RuleCode::Syn000, span, "stray backtick"));
                tokens.push(Token { kind: TokenKind::Unknown, text: "`".to_string(), span });
                continue;
            }
            const DIRECTIVES: &[&str] = &[
                "define", "undef", "include", "timescale", "ifdef", "ifndef", "elsif", "else",
                "endif", "default_nettype", "resetall",
            ];
            let kind = if DIRECTIVES.contains(&name) {
                TokenKind::Directive { name: name.to_string() }
            } else {
                TokenKind::MacroUse { name: name.to_string() }
            };
            tokens.push(Token { kind, text: text[start..i].to_string(), span });
            continue;
        }

        // String literals (tokenized so testbench-ish input stays coherent).
        if c == '"' {
            let start = i;
            i += 1;
            while i < bytes.len() && bytes[i] != b'"' && bytes[i] != b'\n' {
                // Escapes may not hide the quote, but never cross a line.
                if bytes[i] == b'\\' && i + 1 < bytes.len() && bytes[i + 1] != b'\n' {
                    i += 1;
                }
                i += 1;
            }
            let closed = i < bytes.len() && bytes[i] == b'"';
            if closed {
                i += 1;
            }
            let span = sm.span(file, start as u32, i as u32);
            if !closed {
                diagnostics.push(Diagnostic::new(RuleCode::Syn000, span, "unterminated string"));
            }
            tokens.push(Token { kind: TokenKind::Str, text: text[start..i].to_string(), span });
            continue;
        }

        // Operators, longest match first.
        if let Some(op) = OPERATORS.iter().find(|op| text[i..].starts_with(**op)) {
            let span = sm.span(file, i as u32, (i + op.len()) as u32);
            tokens.push(Token { kind: TokenKind::Operator, text: op.to_string(), span });
            i += op.len();
            continue;
        }

        if PUNCT.contains(c) {
            let span = sm.span(file, i as u32, (i + 1) as u32);
            tokens.push(Token { kind: TokenKind::Punct, text: c.to_string(), span });
            i += 1;
            continue;
        }

        // Anything else: one Unknown token per character, with a diagnostic.
        let char_len = text[i..].chars().next().map(|c| c.len_utf8()).unwrap_or(1);
        let span = sm.span(file, i as u32, (i + char_len) as u32);
        diagnostics.push(Diagnostic::new(
            RuleCode::Syn000,
            span,
            format!("unexpected character `{}`", &text[i..i + char_len]),
        ));
        tokens.push(Token {
            kind: TokenKind::Unknown,
            text: text[i..i + char_len].to_string(),
            span,
        });
        i += char_len;
    }

    TokenizeResult { tokens, trivia, diagnostics }
}

fn parse_digits(digits: &str, base: Base) -> u64 {
    let mut v: u64 = 0;
    for c in digits.chars() {
        let d = match c {
            'x' | 'z' | '?' => 0,
            c => c.to_digit(base.radix()).unwrap_or(0) as u64,
        };
        v = v.wrapping_mul(base.radix() as u64).wrapping_add(d);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(src: &str) -> (SourceMap, TokenizeResult) {
        let mut sm = SourceMap::new();
        let f = sm.add_file("t.v", src);
        let r = tokenize(&sm, f);
        (sm, r)
    }

    #[test]
    fn minimal_module() {
        let (_, r) = toks("module m; endmodule");
        assert!(r.diagnostics.is_empty());
        let kinds: Vec<_> = r.tokens.iter().map(|t| t.text.as_str()).collect();
        assert_eq!(kinds, ["module", "m", ";", "endmodule"]);
        assert!(r.tokens[0].is_keyword(Keyword::Module));
        assert_eq!(r.tokens[1].kind, TokenKind::Ident);
        assert!(r.tokens[2].is_punct(';'));
        assert!(r.tokens[3].is_keyword(Keyword::Endmodule));
    }

    #[test]
    fn sized_literal() {
        let (_, r) = toks("2'b00");
        assert_eq!(r.tokens.len(), 1);
        match &r.tokens[0].kind {
            TokenKind::Number(n) => {
                assert_eq!(n.width, Some(2));
                assert_eq!(n.base, Base::Bin);
                assert_eq!(n.value, 0);
                assert!(!n.has_xz);
            }
            k => panic!("wrong kind {k:?}"),
        }
    }

    #[test]
    fn macro_use_keeps_backtick_in_text() {
        let (_, r) = toks("`STATU1");
        assert_eq!(r.tokens.len(), 1);
        assert_eq!(r.tokens[0].text, "`STATU1");
        assert_eq!(r.tokens[0].kind, TokenKind::MacroUse { name: "STATU1".to_string() });
    }

    #[test]
    fn xz_literal_flagged() {
        let (_, r) = toks("4'b1x0z");
        match &r.tokens[0].kind {
            TokenKind::Number(n) => {
                assert!(n.has_xz);
                assert_eq!(n.value, 0b1000);
                assert_eq!(n.digits, "1x0z");
            }
            _ => panic!(),
        }
    }

    #[test]
    fn unknown_char_is_diagnostic_not_abort() {
        let (_, r) = toks("wire a; €");
        assert_eq!(r.diagnostics.len(), 1);
        assert!(r.tokens.iter().any(|t| t.kind == TokenKind::Unknown));
    }

    #[test]
    fn coverage_tiles_input() {
        let src = "module m(input clk);\n  // note\n  reg [7:0] q;\n  always @(posedge clk) q <= q + 8'h01;\nendmodule\n";
        let (_, r) = toks(src);
        let mut pieces: Vec<(u32, u32, String)> = r
            .tokens
            .iter()
            .map(|t| (t.span.start, t.span.end, t.text.clone()))
            .chain(r.trivia.iter().map(|s| {
                (s.start, s.end, src[s.start as usize..s.end as usize].to_string())
            }))
            .collect();
        pieces.sort_by_key(|p| p.0);
        let mut rebuilt = String::new();
        let mut cursor = 0u32;
        for (s, e, text) in pieces {
            assert_eq!(s, cursor, "gap or overlap at offset {cursor}");
            rebuilt.push_str(&text);
            cursor = e;
        }
        assert_eq!(rebuilt, src);
    }
}
