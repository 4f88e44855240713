//! Recursive-descent parser with panic-mode recovery.
//!
//! Malformed regions become diagnostics plus `Error` placeholder nodes; the
//! parser re-synchronizes on structural keywords (`end`, `endcase`,
//! `endmodule`, `always`, `assign`, ...) so that well-formed modules after
//! broken text are never dropped. Recovery events record the expected/found
//! token pair so the lint pass can re-tag the begin/`}` and case/`end`
//! confusions to their dedicated rule codes.

use crate::ast::*;
use crate::diag::{Diagnostic, RuleCode};
use crate::preprocess::{preprocess, MacroTable};
use crate::source::{FileId, SourceMap, Span};
use crate::token::{tokenize, Keyword, Token, TokenKind};

/// Hard stop once this many diagnostics have accumulated for one file.
pub const DIAGNOSTIC_FLOOD_LIMIT: usize = 10_000;

/// Output of the full frontend pipeline for one file.
#[derive(Debug, Clone)]
pub struct ParseResult {
    pub file: FileId,
    pub ast: Ast,
    pub diagnostics: Vec<Diagnostic>,
    pub macros: MacroTable,
}

impl ParseResult {
    pub fn has_errors(&self) -> bool {
        self.diagnostics.iter().any(|d| d.is_error())
    }
}

/// Tokenize, preprocess, parse, and resolve references for one file.
pub fn parse_source(sm: &SourceMap, file: FileId, defines: &MacroTable) -> ParseResult {
    let tok = tokenize(sm, file);
    let mut diagnostics = tok.diagnostics;
    let pre = preprocess(tok.tokens, defines);
    diagnostics.extend(pre.diagnostics);

    // The flood cap counts diagnostics accumulated across all phases.
    if diagnostics.len() >= DIAGNOSTIC_FLOOD_LIMIT {
        diagnostics.truncate(DIAGNOSTIC_FLOOD_LIMIT);
        diagnostics.push(Diagnostic::new(
            RuleCode::Syn999,
            sm.eof_span(file),
            "diagnostic flood: too many problems, analysis stopped",
        ));
        return ParseResult { file, ast: Ast::default(), diagnostics, macros: pre.macros };
    }

    let mut parser = Parser::new(&pre.tokens, sm, file, diagnostics.len());
    let ast = parser.parse_source_unit();
    diagnostics.extend(parser.diags);

    if !parser.flooded {
        diagnostics.extend(resolve_references(&ast));
    }

    ParseResult { file, ast, diagnostics, macros: pre.macros }
}

/// Convenience used by tests and bindings: register text and parse it.
pub fn parse_text(sm: &mut SourceMap, name: &str, text: &str) -> ParseResult {
    let file = sm.add_file(name, text);
    parse_source(sm, file, &MacroTable::default())
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    sm: &'a SourceMap,
    file: FileId,
    diags: Vec<Diagnostic>,
    base_count: usize,
    flooded: bool,
    /// `wire a = b;` desugars to a declaration plus a continuous assign;
    /// the assign waits here for the item loop to pick up.
    pending_assign: Option<AssignItem>,
}

impl<'a> Parser<'a> {
    fn new(tokens: &'a [Token], sm: &'a SourceMap, file: FileId, base_count: usize) -> Parser<'a> {
        Parser {
            tokens,
            pos: 0,
            sm,
            file,
            diags: Vec::new(),
            base_count,
            flooded: false,
            pending_assign: None,
        }
    }

    // ------------------------------------------------------------------
    // Cursor helpers
    // ------------------------------------------------------------------

    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos)
    }

    fn peek2(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos + 1)
    }

    fn bump(&mut self) -> Option<&'a Token> {
        let t = self.tokens.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn at_eof(&self) -> bool {
        self.pos >= self.tokens.len() || self.flooded
    }

    fn at_keyword(&self, k: Keyword) -> bool {
        self.peek().is_some_and(|t| t.is_keyword(k))
    }

    fn at_punct(&self, c: char) -> bool {
        self.peek().is_some_and(|t| t.is_punct(c))
    }

    fn at_op(&self, s: &str) -> bool {
        self.peek().is_some_and(|t| t.is_op(s))
    }

    fn eat_keyword(&mut self, k: Keyword) -> bool {
        if self.at_keyword(k) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_punct(&mut self, c: char) -> bool {
        if self.at_punct(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_op(&mut self, s: &str) -> bool {
        if self.at_op(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn here(&self) -> Span {
        match self.peek() {
            Some(t) => t.span,
            None => self.sm.eof_span(self.file),
        }
    }

    fn prev_span(&self) -> Span {
        if self.pos > 0 {
            self.tokens[self.pos - 1].span
        } else {
            self.here()
        }
    }

    fn found_desc(&self) -> String {
        match self.peek() {
            Some(t) => t.describe(),
            None => "<eof>".to_string(),
        }
    }

    // ------------------------------------------------------------------
    // Diagnostics
    // ------------------------------------------------------------------

    fn emit(&mut self, d: Diagnostic) {
        if self.flooded {
            return;
        }
        if self.base_count + self.diags.len() >= DIAGNOSTIC_FLOOD_LIMIT {
            let span = self.here();
            self.diags.push(Diagnostic::new(
                RuleCode::Syn999,
                span,
                "diagnostic flood: too many problems, analysis stopped",
            ));
            self.flooded = true;
            self.pos = self.tokens.len();
            return;
        }
        self.diags.push(d);
    }

    fn error_at(&mut self, span: Span, message: impl Into<String>) {
        self.emit(Diagnostic::new(RuleCode::Syn000, span, message));
    }

    /// Recovery event with structured expected/found info.
    fn expect_event(&mut self, span: Span, expected: &str, found: &str, message: String) {
        self.emit(Diagnostic::new(RuleCode::Syn000, span, message).with_expectation(expected, found));
    }

    /// Expects a specific punctuation; on mismatch emits one event and does
    /// not consume.
    fn expect_punct(&mut self, c: char, ctx: &str) -> bool {
        if self.eat_punct(c) {
            return true;
        }
        let span = self.here();
        let found = self.found_desc();
        self.expect_event(span, &c.to_string(), &found, format!("expected `{c}` {ctx}, found `{found}`"));
        false
    }

    // ------------------------------------------------------------------
    // Top level
    // ------------------------------------------------------------------

    fn parse_source_unit(&mut self) -> Ast {
        let mut ast = Ast::default();
        let mut skipping_since: Option<Span> = None;
        while !self.at_eof() {
            if self.at_keyword(Keyword::Module) {
                skipping_since = None;
                if let Some(m) = self.parse_module() {
                    ast.modules.push(m);
                }
            } else if self.at_item_start() {
                skipping_since = None;
                if let Some(item) = self.parse_item() {
                    ast.orphans.push(item);
                }
                if let Some(a) = self.take_pending_assign() {
                    ast.orphans.push(Item::Assign(a));
                }
            } else if self.at_stmt_start() {
                skipping_since = None;
                let stmt = self.parse_stmt();
                ast.orphans.push(Item::Stmt(stmt));
            } else {
                // Junk run: one diagnostic for the first offender, then
                // silent skipping until something recognizable.
                let tok_span = self.here();
                if skipping_since.is_none() {
                    let found = self.found_desc();
                    self.error_at(tok_span, format!("expected a module or declaration, found `{found}`"));
                    skipping_since = Some(tok_span);
                }
                self.bump();
            }
        }
        ast
    }

    fn at_item_start(&self) -> bool {
        matches!(
            self.peek().map(|t| &t.kind),
            Some(TokenKind::Keyword(
                Keyword::Wire
                    | Keyword::Reg
                    | Keyword::Assign
                    | Keyword::Always
                    | Keyword::Initial
                    | Keyword::Parameter
                    | Keyword::Localparam
            ))
        )
    }

    fn at_stmt_start(&self) -> bool {
        match self.peek().map(|t| &t.kind) {
            Some(TokenKind::Keyword(Keyword::If | Keyword::Case | Keyword::Casez | Keyword::Begin)) => true,
            Some(TokenKind::Ident) => true,
            Some(TokenKind::Punct) => self.peek().unwrap().is_punct('#'),
            _ => false,
        }
    }

    // ------------------------------------------------------------------
    // Modules
    // ------------------------------------------------------------------

    fn parse_module(&mut self) -> Option<ModuleDecl> {
        let start = self.here();
        self.bump(); // module
        let (name, name_span) = match self.peek() {
            Some(t) if t.kind == TokenKind::Ident => {
                let out = (t.text.clone(), t.span);
                self.bump();
                out
            }
            _ => {
                let span = self.here();
                let found = self.found_desc();
                self.error_at(span, format!("expected module name, found `{found}`"));
                ("<anonymous>".to_string(), span)
            }
        };

        let mut params = Vec::new();
        if self.at_punct('#') {
            self.bump();
            if self.expect_punct('(', "after `#`") {
                params = self.parse_header_params();
            }
        }

        let mut ports = Vec::new();
        if self.at_punct('(') {
            self.bump();
            ports = self.parse_port_list();
        }
        self.expect_punct(';', "after module header");

        let mut items = Vec::new();
        let end_span;
        loop {
            if self.at_eof() {
                let span = self.sm.eof_span(self.file);
                self.expect_event(
                    span,
                    "endmodule",
                    "<eof>",
                    format!("module `{name}` is never closed"),
                );
                end_span = span;
                break;
            }
            if self.at_keyword(Keyword::Endmodule) {
                end_span = self.here();
                self.bump();
                break;
            }
            if self.at_keyword(Keyword::Module) {
                let span = self.here();
                self.expect_event(
                    span,
                    "endmodule",
                    "module",
                    format!("module `{name}` is not closed before the next module"),
                );
                end_span = span;
                break;
            }
            match self.parse_item() {
                Some(item) => items.push(item),
                None => {
                    // parse_item consumed at least one token and diagnosed.
                }
            }
            if let Some(a) = self.take_pending_assign() {
                items.push(Item::Assign(a));
            }
        }

        Some(ModuleDecl { name, name_span, params, ports, items, span: start.to(end_span) })
    }

    fn parse_header_params(&mut self) -> Vec<ParamDecl> {
        let mut params = Vec::new();
        loop {
            if self.at_eof() || self.eat_punct(')') {
                break;
            }
            self.eat_keyword(Keyword::Parameter);
            let Some((name, name_span)) = self.take_ident() else {
                let span = self.here();
                let found = self.found_desc();
                self.error_at(span, format!("expected parameter name, found `{found}`"));
                self.skip_until(|t| t.is_punct(')') || t.is_punct(','));
                if self.eat_punct(',') {
                    continue;
                }
                self.eat_punct(')');
                break;
            };
            let value = if self.eat_punct('=') {
                self.parse_expr()
            } else {
                let span = self.here();
                let found = self.found_desc();
                self.error_at(span, format!("expected `=` after parameter `{name}`, found `{found}`"));
                Expr::Error(span)
            };
            params.push(ParamDecl { name, value, local: false, span: name_span });
            if self.eat_punct(',') {
                continue;
            }
            self.expect_punct(')', "to close the parameter list");
            break;
        }
        params
    }

    fn parse_port_list(&mut self) -> Vec<PortDecl> {
        let mut ports = Vec::new();
        let mut dir: Option<PortDir> = None;
        let mut net = NetKind::Wire;
        let mut width: Option<RangeSpec> = None;
        let mut warned_missing_dir = false;

        loop {
            if self.at_eof() {
                let span = self.here();
                self.error_at(span, "port list is never closed");
                break;
            }
            if self.eat_punct(')') {
                break;
            }
            if let Some(t) = self.peek() {
                match &t.kind {
                    TokenKind::Keyword(Keyword::Input) => {
                        self.bump();
                        dir = Some(PortDir::Input);
                        net = NetKind::Wire;
                        width = None;
                        continue;
                    }
                    TokenKind::Keyword(Keyword::Output) => {
                        self.bump();
                        dir = Some(PortDir::Output);
                        net = NetKind::Wire;
                        width = None;
                        continue;
                    }
                    TokenKind::Keyword(Keyword::Inout) => {
                        self.bump();
                        dir = Some(PortDir::Inout);
                        net = NetKind::Wire;
                        width = None;
                        continue;
                    }
                    TokenKind::Keyword(Keyword::Wire) => {
                        self.bump();
                        net = NetKind::Wire;
                        continue;
                    }
                    TokenKind::Keyword(Keyword::Reg) => {
                        self.bump();
                        net = NetKind::Reg;
                        continue;
                    }
                    TokenKind::Keyword(Keyword::Signed) => {
                        let span = t.span;
                        self.bump();
                        self.emit(
                            Diagnostic::new(RuleCode::Syn004, span, "`signed` is ignored; values are unsigned")
                                .with_hint("the supported subset is unsigned two-state"),
                        );
                        continue;
                    }
                    TokenKind::Punct if t.is_punct('[') => {
                        width = self.parse_range();
                        continue;
                    }
                    TokenKind::Ident => {
                        let name = t.text.clone();
                        let name_span = t.span;
                        self.bump();
                        let d = match dir {
                            Some(d) => d,
                            None => {
                                if !warned_missing_dir {
                                    self.error_at(
                                        name_span,
                                        format!(
                                            "port `{name}` has no direction; only ANSI-style headers are supported"
                                        ),
                                    );
                                    warned_missing_dir = true;
                                }
                                PortDir::Input
                            }
                        };
                        ports.push(PortDecl {
                            name,
                            dir: d,
                            net,
                            width: width.clone(),
                            span: name_span,
                            name_span,
                        });
                        if self.eat_punct(',') {
                            continue;
                        }
                        self.expect_punct(')', "to close the port list");
                        break;
                    }
                    _ => {
                        let span = t.span;
                        let found = self.found_desc();
                        self.error_at(span, format!("unexpected `{found}` in port list"));
                        self.bump();
                        self.skip_until(|t| t.is_punct(',') || t.is_punct(')'));
                        self.eat_punct(',');
                    }
                }
            }
        }
        ports
    }

    fn parse_range(&mut self) -> Option<RangeSpec> {
        let start = self.here();
        if !self.eat_punct('[') {
            return None;
        }
        let msb = self.parse_expr();
        self.expect_punct(':', "in range");
        let lsb = self.parse_expr();
        let end = self.here();
        self.expect_punct(']', "to close the range");
        Some(RangeSpec { msb, lsb, span: start.to(end) })
    }

    // ------------------------------------------------------------------
    // Items
    // ------------------------------------------------------------------

    /// Parses one module item. Returns `None` after emitting a diagnostic
    /// and consuming at least one token, so callers always make progress.
    fn parse_item(&mut self) -> Option<Item> {
        let t = self.peek()?;
        match &t.kind {
            TokenKind::Keyword(Keyword::Wire) => self.parse_net_decl(NetKind::Wire),
            TokenKind::Keyword(Keyword::Reg) => self.parse_net_decl(NetKind::Reg),
            TokenKind::Keyword(Keyword::Parameter) => self.parse_param_item(false),
            TokenKind::Keyword(Keyword::Localparam) => self.parse_param_item(true),
            TokenKind::Keyword(Keyword::Assign) => self.parse_assign_item(),
            TokenKind::Keyword(Keyword::Always) => self.parse_always(),
            TokenKind::Keyword(Keyword::Initial) => self.parse_initial(),
            TokenKind::Keyword(
                Keyword::Generate | Keyword::Function | Keyword::Task | Keyword::Casex,
            ) => {
                let span = t.span;
                let found = self.found_desc();
                self.error_at(span, format!("`{found}` is outside the supported subset"));
                self.bump();
                self.skip_until(|t| {
                    matches!(
                        t.kind,
                        TokenKind::Keyword(
                            Keyword::Endgenerate
                                | Keyword::Endfunction
                                | Keyword::Endtask
                                | Keyword::Endmodule
                                | Keyword::Module
                                | Keyword::Always
                                | Keyword::Assign
                        )
                    )
                });
                self.eat_keyword(Keyword::Endgenerate);
                self.eat_keyword(Keyword::Endfunction);
                self.eat_keyword(Keyword::Endtask);
                Some(Item::Error(span))
            }
            TokenKind::Ident => {
                // `mod inst (...)` instantiation vs a stray statement.
                if self.peek2().is_some_and(|t2| t2.kind == TokenKind::Ident || t2.is_punct('#')) {
                    self.parse_instantiation()
                } else {
                    let span = t.span;
                    let stmt = self.parse_stmt();
                    self.error_at(span, "statement outside a procedural block");
                    Some(Item::Stmt(stmt))
                }
            }
            TokenKind::Keyword(Keyword::If | Keyword::Case | Keyword::Casez | Keyword::Begin) => {
                let span = t.span;
                let stmt = self.parse_stmt();
                self.error_at(span, "statement outside a procedural block");
                Some(Item::Stmt(stmt))
            }
            _ => {
                let span = t.span;
                let found = self.found_desc();
                self.error_at(span, format!("expected a module item, found `{found}`"));
                self.bump();
                self.skip_until(|t| {
                    matches!(
                        t.kind,
                        TokenKind::Keyword(
                            Keyword::Wire
                                | Keyword::Reg
                                | Keyword::Assign
                                | Keyword::Always
                                | Keyword::Initial
                                | Keyword::Parameter
                                | Keyword::Localparam
                                | Keyword::Endmodule
                                | Keyword::Module
                        )
                    ) || t.is_punct(';')
                });
                self.eat_punct(';');
                None
            }
        }
    }

    fn parse_net_decl(&mut self, kind: NetKind) -> Option<Item> {
        let start = self.here();
        self.bump(); // wire | reg
        if self.at_keyword(Keyword::Signed) {
            let span = self.here();
            self.bump();
            self.emit(
                Diagnostic::new(RuleCode::Syn004, span, "`signed` is ignored; values are unsigned")
                    .with_hint("the supported subset is unsigned two-state"),
            );
        }
        let width = if self.at_punct('[') { self.parse_range() } else { None };
        let mut names = Vec::new();
        let mut initializer: Option<(Expr, Span)> = None;
        loop {
            let Some((name, span)) = self.take_ident() else {
                let span = self.here();
                let found = self.found_desc();
                self.error_at(span, format!("expected a net name, found `{found}`"));
                self.skip_until(|t| t.is_punct(';') || t.is_keyword(Keyword::Endmodule));
                break;
            };
            names.push(DeclName { name, span });
            if self.eat_punct('=') {
                let eq_span = self.prev_span();
                let value = self.parse_expr();
                initializer = Some((value, eq_span));
                break;
            }
            if self.eat_punct(',') {
                continue;
            }
            break;
        }
        let end = self.here();
        self.expect_punct(';', "after declaration");
        let decl_span = start.to(end);
        let decl = NetDecl { kind, width, names: names.clone(), span: decl_span };
        match initializer {
            // `wire a = expr;` is shorthand for a declaration plus a
            // continuous assignment.
            Some((value, _)) if kind == NetKind::Wire && names.len() == 1 => {
                let target = LValue::Ident { name: names[0].name.clone(), span: names[0].span };
                self.pending_assign = Some(AssignItem { target, value, span: decl_span });
                Some(Item::Net(decl))
            }
            Some((_, eq_span)) => {
                self.emit(
                    Diagnostic::new(RuleCode::Syn004, eq_span, "declaration initializer ignored")
                        .with_hint("registers reset through the reset logic, not initializers"),
                );
                Some(Item::Net(decl))
            }
            None => Some(Item::Net(decl)),
        }
    }

    fn parse_param_item(&mut self, local: bool) -> Option<Item> {
        let start = self.here();
        self.bump(); // parameter | localparam
        let Some((name, _)) = self.take_ident() else {
            let span = self.here();
            let found = self.found_desc();
            self.error_at(span, format!("expected parameter name, found `{found}`"));
            self.skip_until(|t| t.is_punct(';'));
            self.eat_punct(';');
            return None;
        };
        let value = if self.eat_punct('=') {
            self.parse_expr()
        } else {
            let span = self.here();
            let found = self.found_desc();
            self.error_at(span, format!("expected `=` after parameter `{name}`, found `{found}`"));
            Expr::Error(span)
        };
        let end = self.here();
        self.expect_punct(';', "after parameter");
        Some(Item::Param(ParamDecl { name, value, local, span: start.to(end) }))
    }

    fn parse_assign_item(&mut self) -> Option<Item> {
        let start = self.here();
        self.bump(); // assign
        let Some(target) = self.parse_lvalue() else {
            let span = self.here();
            let found = self.found_desc();
            self.error_at(span, format!("expected assignment target, found `{found}`"));
            self.skip_until(|t| t.is_punct(';') || t.is_keyword(Keyword::Endmodule));
            self.eat_punct(';');
            return None;
        };
        if !self.eat_punct('=') {
            let span = self.here();
            let found = self.found_desc();
            self.expect_event(span, "=", &found, format!("expected `=` in assign, found `{found}`"));
            self.skip_until(|t| t.is_punct(';') || t.is_keyword(Keyword::Endmodule));
            self.eat_punct(';');
            return Some(Item::Error(start));
        }
        let value = self.parse_expr();
        let end = self.prev_span();
        self.expect_punct(';', "after assign");
        Some(Item::Assign(AssignItem { target, value, span: start.to(end) }))
    }

    fn parse_always(&mut self) -> Option<Item> {
        let start = self.here();
        self.bump(); // always
        let sensitivity = if self.at_punct('@') {
            self.bump();
            self.parse_sensitivity()
        } else {
            let span = self.here();
            self.error_at(span, "always block without `@` sensitivity");
            Sensitivity::Star
        };
        let body = self.parse_branch();
        let end = self.prev_span();
        Some(Item::Always(AlwaysBlock { sensitivity, body, span: start.to(end) }))
    }

    fn parse_sensitivity(&mut self) -> Sensitivity {
        // `@*`
        if self.eat_op("*") {
            return Sensitivity::Star;
        }
        if !self.expect_punct('(', "after `@`") {
            return Sensitivity::Star;
        }
        // `@(*)`
        if self.eat_op("*") {
            self.expect_punct(')', "to close the sensitivity list");
            return Sensitivity::Star;
        }
        let mut edges = Vec::new();
        let mut plain: Vec<Span> = Vec::new();
        loop {
            if self.at_eof() || self.eat_punct(')') {
                break;
            }
            if self.at_keyword(Keyword::Posedge) || self.at_keyword(Keyword::Negedge) {
                let polarity = if self.at_keyword(Keyword::Posedge) {
                    EdgePolarity::Pos
                } else {
                    EdgePolarity::Neg
                };
                let kw_span = self.here();
                self.bump();
                match self.take_ident() {
                    Some((signal, span)) => {
                        edges.push(EdgeEvent { polarity, signal, span: kw_span.to(span) })
                    }
                    None => {
                        let span = self.here();
                        let found = self.found_desc();
                        self.error_at(span, format!("expected a signal after edge keyword, found `{found}`"));
                    }
                }
            } else if let Some((_, span)) = self.take_ident() {
                plain.push(span);
            } else {
                let span = self.here();
                let found = self.found_desc();
                self.error_at(span, format!("unexpected `{found}` in sensitivity list"));
                self.bump();
            }
            if self.eat_punct(',') || self.eat_keyword(Keyword::Or) {
                continue;
            }
        }
        if edges.is_empty() {
            if plain.is_empty() {
                let span = self.prev_span();
                self.error_at(span, "empty sensitivity list");
            } else {
                self.emit(
                    Diagnostic::new(
                        RuleCode::Syn004,
                        plain[0],
                        "explicit combinational sensitivity list treated as `@(*)`",
                    )
                    .with_hint("write `always @(*)`"),
                );
            }
            Sensitivity::Star
        } else {
            for span in plain {
                self.emit(Diagnostic::new(
                    RuleCode::Syn004,
                    span,
                    "level-sensitive entry ignored in an edge sensitivity list",
                ));
            }
            Sensitivity::Edges(edges)
        }
    }

    fn parse_initial(&mut self) -> Option<Item> {
        let start = self.here();
        self.bump(); // initial
        let body = self.parse_branch();
        let end = self.prev_span();
        Some(Item::Initial(InitialBlock { body, span: start.to(end) }))
    }

    fn parse_instantiation(&mut self) -> Option<Item> {
        let start = self.here();
        let (module, module_span) = self.take_ident()?;
        if self.at_punct('#') {
            let span = self.here();
            self.bump();
            self.error_at(span, "instance parameter overrides are not supported");
            if self.eat_punct('(') {
                self.skip_balanced_parens();
            }
        }
        let Some((instance, instance_span)) = self.take_ident() else {
            let span = self.here();
            let found = self.found_desc();
            self.error_at(span, format!("expected instance name after `{module}`, found `{found}`"));
            self.skip_until(|t| t.is_punct(';') || t.is_keyword(Keyword::Endmodule));
            self.eat_punct(';');
            return Some(Item::Error(start));
        };
        if !self.expect_punct('(', "to open the port connections") {
            self.skip_until(|t| t.is_punct(';') || t.is_keyword(Keyword::Endmodule));
            self.eat_punct(';');
            return Some(Item::Error(start));
        }
        let conns = if self.at_punct('.') {
            let mut named = Vec::new();
            loop {
                if self.at_eof() || self.eat_punct(')') {
                    break;
                }
                if !self.expect_punct('.', "before a port name") {
                    self.bump();
                    continue;
                }
                let dot_span = self.prev_span();
                let Some((port, port_span)) = self.take_ident() else {
                    let span = self.here();
                    let found = self.found_desc();
                    self.error_at(span, format!("expected port name after `.`, found `{found}`"));
                    self.skip_until(|t| t.is_punct(',') || t.is_punct(')'));
                    self.eat_punct(',');
                    continue;
                };
                self.expect_punct('(', "after the port name");
                let expr = if self.at_punct(')') { None } else { Some(self.parse_expr()) };
                let end = self.here();
                self.expect_punct(')', "to close the connection");
                named.push(NamedConn { port, port_span, expr, span: dot_span.to(end) });
                if self.eat_punct(',') {
                    continue;
                }
                self.expect_punct(')', "to close the connections");
                break;
            }
            Connections::Named(named)
        } else if self.eat_punct(')') {
            Connections::Positional(Vec::new())
        } else {
            let mut exprs = Vec::new();
            loop {
                exprs.push(self.parse_expr());
                if self.eat_punct(',') {
                    continue;
                }
                self.expect_punct(')', "to close the connections");
                break;
            }
            Connections::Positional(exprs)
        };
        let end = self.here();
        self.expect_punct(';', "after instantiation");
        Some(Item::Instance(Instantiation {
            module,
            module_span,
            instance,
            instance_span,
            conns,
            span: start.to(end),
        }))
    }

    // ------------------------------------------------------------------
    // Statements
    // ------------------------------------------------------------------

    /// A statement body: either a begin/end block (flattened into the list)
    /// or a single statement.
    fn parse_branch(&mut self) -> Vec<Statement> {
        if self.at_keyword(Keyword::Begin) {
            self.bump();
            self.consume_block_label();
            self.parse_stmt_list()
        } else {
            vec![self.parse_stmt()]
        }
    }

    fn consume_block_label(&mut self) {
        if self.at_punct(':') {
            let span = self.here();
            self.bump();
            if self.take_ident().is_none() {
                self.error_at(span, "expected a label name after `:`");
            } else {
                self.emit(Diagnostic::new(RuleCode::Syn004, span, "block label ignored"));
            }
        }
    }

    /// Statements until `end`. A `}` is treated as a mistaken `end` (the
    /// event is what the lint pass re-tags to the begin/end rule); running
    /// into `endcase`/`endmodule`/eof reports the imbalance and leaves the
    /// closer for the outer context.
    fn parse_stmt_list(&mut self) -> Vec<Statement> {
        let mut stmts = Vec::new();
        loop {
            if self.at_eof() {
                let span = self.sm.eof_span(self.file);
                self.expect_event(span, "end", "<eof>", "begin block is never closed".to_string());
                break;
            }
            let t = self.peek().unwrap();
            if t.is_keyword(Keyword::End) {
                self.bump();
                break;
            }
            if t.is_punct('}') {
                let span = t.span;
                self.expect_event(
                    span,
                    "end",
                    "}",
                    "begin block closed with `}` instead of `end`".to_string(),
                );
                self.bump();
                break;
            }
            if t.is_keyword(Keyword::Endmodule) || t.is_keyword(Keyword::Endcase) {
                let span = t.span;
                let found = self.found_desc();
                self.expect_event(
                    span,
                    "end",
                    &found,
                    format!("begin block is not closed before `{found}`"),
                );
                break;
            }
            if self.at_stmt_start() {
                stmts.push(self.parse_stmt());
            } else {
                let span = t.span;
                let found = self.found_desc();
                self.error_at(span, format!("expected a statement or `end`, found `{found}`"));
                self.bump();
                self.skip_until(|t| {
                    matches!(
                        t.kind,
                        TokenKind::Keyword(
                            Keyword::End
                                | Keyword::Endcase
                                | Keyword::Endmodule
                                | Keyword::If
                                | Keyword::Case
                                | Keyword::Casez
                                | Keyword::Begin
                        )
                    ) || t.is_punct('}')
                        || t.kind == TokenKind::Ident
                });
                stmts.push(Statement::Error(span));
            }
        }
        stmts
    }

    fn parse_stmt(&mut self) -> Statement {
        let t = match self.peek() {
            Some(t) => t,
            None => return Statement::Error(self.sm.eof_span(self.file)),
        };
        let start = t.span;
        match &t.kind {
            TokenKind::Keyword(Keyword::Begin) => {
                self.bump();
                self.consume_block_label();
                let stmts = self.parse_stmt_list();
                Statement::Block { stmts, span: start.to(self.prev_span()) }
            }
            TokenKind::Keyword(Keyword::If) => {
                self.bump();
                self.expect_punct('(', "after `if`");
                let cond = self.parse_expr();
                self.expect_punct(')', "after the condition");
                let then_branch = self.parse_branch();
                let else_branch = if self.eat_keyword(Keyword::Else) {
                    Some(self.parse_branch())
                } else {
                    None
                };
                Statement::If { cond, then_branch, else_branch, span: start.to(self.prev_span()) }
            }
            TokenKind::Keyword(k @ (Keyword::Case | Keyword::Casez)) => {
                let kind = if *k == Keyword::Case { CaseKind::Case } else { CaseKind::Casez };
                self.bump();
                self.parse_case(kind, start)
            }
            TokenKind::Punct if t.is_punct('#') => {
                self.bump();
                let amount = match self.peek().map(|t| &t.kind) {
                    Some(TokenKind::Number(n)) => {
                        let v = n.value;
                        self.bump();
                        v
                    }
                    _ => {
                        let span = self.here();
                        let found = self.found_desc();
                        self.error_at(span, format!("expected a delay value, found `{found}`"));
                        0
                    }
                };
                if self.eat_punct(';') {
                    Statement::Delay { amount, stmt: None, span: start.to(self.prev_span()) }
                } else if self.at_stmt_start() {
                    let inner = self.parse_stmt();
                    Statement::Delay {
                        amount,
                        stmt: Some(Box::new(inner)),
                        span: start.to(self.prev_span()),
                    }
                } else {
                    Statement::Delay { amount, stmt: None, span: start.to(self.prev_span()) }
                }
            }
            TokenKind::Ident if t.text.starts_with('$') => {
                let name = t.text.clone();
                self.bump();
                self.error_at(start, format!("system task `{name}` is not supported"));
                if self.eat_punct('(') {
                    self.skip_balanced_parens();
                }
                self.eat_punct(';');
                Statement::Error(start)
            }
            TokenKind::Ident => {
                let Some(target) = self.parse_lvalue() else {
                    let span = self.here();
                    self.bump();
                    return Statement::Error(span);
                };
                if self.eat_op("<=") {
                    let value = self.parse_expr();
                    let end = self.prev_span();
                    self.expect_punct(';', "after assignment");
                    Statement::Nonblocking { target, value, span: start.to(end) }
                } else if self.eat_punct('=') {
                    let value = self.parse_expr();
                    let end = self.prev_span();
                    self.expect_punct(';', "after assignment");
                    Statement::Blocking { target, value, span: start.to(end) }
                } else {
                    let span = self.here();
                    let found = self.found_desc();
                    self.expect_event(
                        span,
                        "= or <=",
                        &found,
                        format!("expected `=` or `<=` after `{}`, found `{found}`", target.base_name()),
                    );
                    self.skip_until(|t| {
                        t.is_punct(';')
                            || t.is_punct('}')
                            || matches!(
                                t.kind,
                                TokenKind::Keyword(
                                    Keyword::End
                                        | Keyword::Endcase
                                        | Keyword::Endmodule
                                        | Keyword::Module
                                        | Keyword::Always
                                        | Keyword::Assign
                                )
                            )
                    });
                    self.eat_punct(';');
                    Statement::Error(start)
                }
            }
            _ => {
                let found = self.found_desc();
                self.error_at(start, format!("expected a statement, found `{found}`"));
                self.bump();
                Statement::Error(start)
            }
        }
    }

    fn parse_case(&mut self, kind: CaseKind, start: Span) -> Statement {
        self.expect_punct('(', "after `case`");
        let expr = if self.at_punct(')') {
            let span = self.here();
            let found = self.found_desc();
            self.expect_event(span, "expression", &found, "expected a case expression".to_string());
            Expr::Error(span)
        } else {
            self.parse_expr()
        };
        self.expect_punct(')', "after the case expression");

        let mut arms: Vec<CaseArm> = Vec::new();
        let mut default: Option<Vec<Statement>> = None;
        loop {
            if self.at_eof() {
                let span = self.sm.eof_span(self.file);
                self.expect_event(span, "endcase", "<eof>", "case block is never closed".to_string());
                break;
            }
            let t = self.peek().unwrap();
            if t.is_keyword(Keyword::Endcase) {
                self.bump();
                break;
            }
            if t.is_keyword(Keyword::End) {
                // The common slip: closing the case region with `end`.
                let span = t.span;
                self.expect_event(
                    span,
                    "endcase",
                    "end",
                    "case block terminated by `end` instead of `endcase`".to_string(),
                );
                self.bump();
                break;
            }
            if t.is_punct('}') {
                let span = t.span;
                self.expect_event(
                    span,
                    "endcase",
                    "}",
                    "case block terminated by `}` instead of `endcase`".to_string(),
                );
                self.bump();
                break;
            }
            if t.is_keyword(Keyword::Endmodule) {
                let span = t.span;
                self.expect_event(
                    span,
                    "endcase",
                    "endmodule",
                    "case block is not closed before `endmodule`".to_string(),
                );
                break;
            }
            if t.is_keyword(Keyword::Default) {
                let def_span = t.span;
                self.bump();
                self.eat_punct(':');
                if self.at_stmt_start() {
                    default = Some(self.parse_branch());
                } else {
                    let span = self.here();
                    let found = self.found_desc();
                    self.error_at(span, format!("expected a statement after `default`, found `{found}`"));
                    self.eat_punct(';');
                    default = Some(vec![Statement::Error(def_span)]);
                }
                continue;
            }
            if self.can_start_expr() {
                let arm_start = t.span;
                let mut labels = vec![self.parse_expr()];
                while self.eat_punct(',') {
                    labels.push(self.parse_expr());
                }
                if self.eat_punct(':') {
                    let body = self.parse_branch();
                    arms.push(CaseArm { labels, body, span: arm_start.to(self.prev_span()) });
                } else {
                    let span = self.here();
                    let found = self.found_desc();
                    self.expect_event(
                        span,
                        ":",
                        &found,
                        format!("expected `:` after case label, found `{found}`"),
                    );
                    self.eat_punct(';');
                    arms.push(CaseArm {
                        labels,
                        body: vec![Statement::Error(arm_start)],
                        span: arm_start.to(span),
                    });
                }
                continue;
            }
            // Stray token in the arm region.
            let span = t.span;
            let found = self.found_desc();
            self.error_at(span, format!("expected a case label or `endcase`, found `{found}`"));
            self.bump();
            self.skip_until(|t| {
                matches!(
                    t.kind,
                    TokenKind::Keyword(
                        Keyword::Default | Keyword::Endcase | Keyword::End | Keyword::Endmodule
                    ) | TokenKind::Ident
                        | TokenKind::Number(_)
                ) || t.is_punct('}')
            });
        }
        Statement::Case { kind, expr, arms, default, span: start.to(self.prev_span()) }
    }

    // ------------------------------------------------------------------
    // Expressions
    // ------------------------------------------------------------------

    fn can_start_expr(&self) -> bool {
        match self.peek().map(|t| &t.kind) {
            Some(TokenKind::Ident) | Some(TokenKind::Number(_)) => true,
            Some(TokenKind::Punct) => {
                let t = self.peek().unwrap();
                t.is_punct('(') || t.is_punct('{')
            }
            Some(TokenKind::Operator) => {
                let t = self.peek().unwrap();
                matches!(t.text.as_str(), "!" | "~" | "-" | "&" | "|" | "^")
            }
            _ => false,
        }
    }

    fn parse_expr(&mut self) -> Expr {
        let lhs = self.parse_binary(0);
        if self.at_punct('?') {
            let start = lhs.span();
            self.bump();
            let then_expr = self.parse_expr();
            self.expect_punct(':', "in conditional expression");
            let else_expr = self.parse_expr();
            let span = start.to(self.prev_span());
            return Expr::Ternary {
                cond: Box::new(lhs),
                then_expr: Box::new(then_expr),
                else_expr: Box::new(else_expr),
                span,
            };
        }
        lhs
    }

    fn parse_binary(&mut self, min_prec: u8) -> Expr {
        let mut lhs = self.parse_unary();
        while let Some(op) = self.peek_binary_op() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.bump();
            let rhs = self.parse_binary(prec + 1);
            let span = lhs.span().to(rhs.span());
            lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs), span };
        }
        lhs
    }

    fn peek_binary_op(&self) -> Option<BinaryOp> {
        let t = self.peek()?;
        if t.kind != TokenKind::Operator {
            return None;
        }
        Some(match t.text.as_str() {
            "+" => BinaryOp::Add,
            "-" => BinaryOp::Sub,
            "<<" => BinaryOp::Shl,
            ">>" => BinaryOp::Shr,
            "<" => BinaryOp::Lt,
            "<=" => BinaryOp::Le,
            ">" => BinaryOp::Gt,
            ">=" => BinaryOp::Ge,
            "==" => BinaryOp::Eq,
            "!=" => BinaryOp::Ne,
            "&&" => BinaryOp::LogicAnd,
            "||" => BinaryOp::LogicOr,
            "&" => BinaryOp::BitAnd,
            "|" => BinaryOp::BitOr,
            "^" => BinaryOp::BitXor,
            _ => return None,
        })
    }

    fn parse_unary(&mut self) -> Expr {
        if let Some(t) = self.peek() {
            if t.kind == TokenKind::Operator {
                let op = match t.text.as_str() {
                    "!" => Some(UnaryOp::LogicNot),
                    "~" => Some(UnaryOp::BitNot),
                    "-" => Some(UnaryOp::Neg),
                    "&" => Some(UnaryOp::RedAnd),
                    "|" => Some(UnaryOp::RedOr),
                    "^" => Some(UnaryOp::RedXor),
                    _ => None,
                };
                if let Some(op) = op {
                    let start = t.span;
                    self.bump();
                    let operand = self.parse_unary();
                    let span = start.to(operand.span());
                    return Expr::Unary { op, operand: Box::new(operand), span };
                }
            }
        }
        self.parse_primary()
    }

    fn parse_primary(&mut self) -> Expr {
        let Some(t) = self.peek() else {
            let span = self.sm.eof_span(self.file);
            self.expect_event(span, "expression", "<eof>", "expected an expression".to_string());
            return Expr::Error(span);
        };
        let start = t.span;
        match &t.kind {
            TokenKind::Number(n) => {
                let number = n.clone();
                self.bump();
                Expr::Literal { number, span: start }
            }
            TokenKind::Ident => {
                let name = t.text.clone();
                self.bump();
                if self.at_punct('[') {
                    self.bump();
                    let first = self.parse_expr();
                    if self.eat_punct(':') {
                        let lsb = self.parse_expr();
                        let end = self.here();
                        self.expect_punct(']', "to close the part-select");
                        Expr::PartSelect {
                            base: name,
                            base_span: start,
                            msb: Box::new(first),
                            lsb: Box::new(lsb),
                            span: start.to(end),
                        }
                    } else {
                        let end = self.here();
                        self.expect_punct(']', "to close the bit-select");
                        Expr::BitSelect {
                            base: name,
                            base_span: start,
                            index: Box::new(first),
                            span: start.to(end),
                        }
                    }
                } else {
                    Expr::Ident { name, span: start }
                }
            }
            TokenKind::Punct if t.is_punct('(') => {
                self.bump();
                let inner = self.parse_expr();
                self.expect_punct(')', "to close the expression");
                inner
            }
            TokenKind::Punct if t.is_punct('{') => {
                self.bump();
                let first = self.parse_expr();
                if self.at_punct('{') {
                    // `{N{expr, ...}}`
                    self.bump();
                    let mut inner = vec![self.parse_expr()];
                    while self.eat_punct(',') {
                        inner.push(self.parse_expr());
                    }
                    self.expect_punct('}', "to close the repetition");
                    let end = self.here();
                    self.expect_punct('}', "to close the concatenation");
                    Expr::Repeat { count: Box::new(first), inner, span: start.to(end) }
                } else {
                    let mut parts = vec![first];
                    while self.eat_punct(',') {
                        parts.push(self.parse_expr());
                    }
                    let end = self.here();
                    self.expect_punct('}', "to close the concatenation");
                    Expr::Concat { parts, span: start.to(end) }
                }
            }
            _ => {
                let found = self.found_desc();
                self.expect_event(
                    start,
                    "expression",
                    &found,
                    format!("expected an expression, found `{found}`"),
                );
                Expr::Error(start)
            }
        }
    }

    fn parse_lvalue(&mut self) -> Option<LValue> {
        let (name, span) = self.take_ident()?;
        if self.at_punct('[') {
            self.bump();
            let first = self.parse_expr();
            if self.eat_punct(':') {
                let lsb = self.parse_expr();
                let end = self.here();
                self.expect_punct(']', "to close the part-select");
                Some(LValue::PartSelect {
                    base: name,
                    base_span: span,
                    msb: Box::new(first),
                    lsb: Box::new(lsb),
                    span: span.to(end),
                })
            } else {
                let end = self.here();
                self.expect_punct(']', "to close the bit-select");
                Some(LValue::BitSelect {
                    base: name,
                    base_span: span,
                    index: Box::new(first),
                    span: span.to(end),
                })
            }
        } else {
            Some(LValue::Ident { name, span })
        }
    }

    // ------------------------------------------------------------------
    // Utility
    // ------------------------------------------------------------------

    fn take_ident(&mut self) -> Option<(String, Span)> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Ident => {
                let out = (t.text.clone(), t.span);
                self.bump();
                Some(out)
            }
            _ => None,
        }
    }

    fn skip_until(&mut self, pred: impl Fn(&Token) -> bool) {
        while let Some(t) = self.peek() {
            if pred(t) {
                break;
            }
            self.bump();
        }
    }

    fn skip_balanced_parens(&mut self) {
        // The opening paren has been consumed. Unbalanced input must not
        // swallow later structure, so structural keywords end the skip.
        let mut depth = 1usize;
        while let Some(t) = self.peek() {
            if matches!(
                t.kind,
                TokenKind::Keyword(Keyword::Module | Keyword::Endmodule | Keyword::Endcase)
            ) {
                return;
            }
            let t = self.bump().unwrap();
            if t.is_punct('(') {
                depth += 1;
            } else if t.is_punct(')') {
                depth -= 1;
                if depth == 0 {
                    return;
                }
            }
        }
    }

    fn take_pending_assign(&mut self) -> Option<AssignItem> {
        self.pending_assign.take()
    }
}

/// Collects unresolved identifier references as warnings. Declarations in a
/// module are its ports, nets, and parameters; orphan fragments resolve
/// against an empty scope.
fn resolve_references(ast: &Ast) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    for m in &ast.modules {
        let mut declared: std::collections::BTreeSet<&str> = std::collections::BTreeSet::new();
        for p in &m.ports {
            declared.insert(&p.name);
        }
        for p in &m.params {
            declared.insert(&p.name);
        }
        for item in &m.items {
            match item {
                Item::Net(n) => {
                    for d in &n.names {
                        declared.insert(&d.name);
                    }
                }
                Item::Param(p) => {
                    declared.insert(&p.name);
                }
                _ => {}
            }
        }
        for item in &m.items {
            check_item_refs(item, &declared, &mut diags);
        }
    }
    let empty = std::collections::BTreeSet::new();
    for item in &ast.orphans {
        check_item_refs(item, &empty, &mut diags);
    }
    diags
}

fn check_item_refs(
    item: &Item,
    declared: &std::collections::BTreeSet<&str>,
    diags: &mut Vec<Diagnostic>,
) {
    let mut check_name = |name: &str, span: Span, diags: &mut Vec<Diagnostic>| {
        if !declared.contains(name) && !name.starts_with('$') {
            diags.push(
                Diagnostic::new(
                    RuleCode::Syn001,
                    span,
                    format!("`{name}` is not declared"),
                )
                .with_hint("declare it as a port, wire, reg, or parameter"),
            );
        }
    };
    match item {
        Item::Assign(a) => {
            check_name(a.target.base_name(), a.target.span(), diags);
            check_lvalue_index_refs(&a.target, &mut check_name, diags);
            check_expr_refs(&a.value, &mut check_name, diags);
        }
        Item::Always(a) => {
            if let Sensitivity::Edges(edges) = &a.sensitivity {
                for e in edges {
                    check_name(&e.signal, e.span, diags);
                }
            }
            for s in &a.body {
                check_stmt_refs(s, &mut check_name, diags);
            }
        }
        Item::Initial(i) => {
            for s in &i.body {
                check_stmt_refs(s, &mut check_name, diags);
            }
        }
        Item::Instance(inst) => match &inst.conns {
            Connections::Positional(es) => {
                for e in es {
                    check_expr_refs(e, &mut check_name, diags);
                }
            }
            Connections::Named(ns) => {
                for n in ns {
                    if let Some(e) = &n.expr {
                        check_expr_refs(e, &mut check_name, diags);
                    }
                }
            }
        },
        Item::Stmt(s) => check_stmt_refs(s, &mut check_name, diags),
        Item::Net(_) | Item::Param(_) | Item::Error(_) => {}
    }
}

fn check_lvalue_index_refs(
    lv: &LValue,
    check_name: &mut impl FnMut(&str, Span, &mut Vec<Diagnostic>),
    diags: &mut Vec<Diagnostic>,
) {
    match lv {
        LValue::BitSelect { index, .. } => check_expr_refs(index, check_name, diags),
        LValue::PartSelect { msb, lsb, .. } => {
            check_expr_refs(msb, check_name, diags);
            check_expr_refs(lsb, check_name, diags);
        }
        LValue::Ident { .. } => {}
    }
}

fn check_stmt_refs(
    s: &Statement,
    check_name: &mut impl FnMut(&str, Span, &mut Vec<Diagnostic>),
    diags: &mut Vec<Diagnostic>,
) {
    match s {
        Statement::Blocking { target, value, .. } | Statement::Nonblocking { target, value, .. } => {
            check_name(target.base_name(), target.span(), diags);
            check_lvalue_index_refs(target, check_name, diags);
            check_expr_refs(value, check_name, diags);
        }
        Statement::If { cond, then_branch, else_branch, .. } => {
            check_expr_refs(cond, check_name, diags);
            for s in then_branch {
                check_stmt_refs(s, check_name, diags);
            }
            if let Some(e) = else_branch {
                for s in e {
                    check_stmt_refs(s, check_name, diags);
                }
            }
        }
        Statement::Case { expr, arms, default, .. } => {
            check_expr_refs(expr, check_name, diags);
            for arm in arms {
                for l in &arm.labels {
                    check_expr_refs(l, check_name, diags);
                }
                for s in &arm.body {
                    check_stmt_refs(s, check_name, diags);
                }
            }
            if let Some(d) = default {
                for s in d {
                    check_stmt_refs(s, check_name, diags);
                }
            }
        }
        Statement::Block { stmts, .. } => {
            for s in stmts {
                check_stmt_refs(s, check_name, diags);
            }
        }
        Statement::Delay { stmt, .. } => {
            if let Some(s) = stmt {
                check_stmt_refs(s, check_name, diags);
            }
        }
        Statement::Error(_) => {}
    }
}

fn check_expr_refs(
    e: &Expr,
    check_name: &mut impl FnMut(&str, Span, &mut Vec<Diagnostic>),
    diags: &mut Vec<Diagnostic>,
) {
    match e {
        Expr::Ident { name, span } => check_name(name, *span, diags),
        Expr::Literal { .. } | Expr::Error(_) => {}
        Expr::Unary { operand, .. } => check_expr_refs(operand, check_name, diags),
        Expr::Binary { lhs, rhs, .. } => {
            check_expr_refs(lhs, check_name, diags);
            check_expr_refs(rhs, check_name, diags);
        }
        Expr::BitSelect { base, base_span, index, .. } => {
            check_name(base, *base_span, diags);
            check_expr_refs(index, check_name, diags);
        }
        Expr::PartSelect { base, base_span, msb, lsb, .. } => {
            check_name(base, *base_span, diags);
            check_expr_refs(msb, check_name, diags);
            check_expr_refs(lsb, check_name, diags);
        }
        Expr::Concat { parts, .. } => {
            for p in parts {
                check_expr_refs(p, check_name, diags);
            }
        }
        Expr::Repeat { count, inner, .. } => {
            check_expr_refs(count, check_name, diags);
            for p in inner {
                check_expr_refs(p, check_name, diags);
            }
        }
        Expr::Ternary { cond, then_expr, else_expr, .. } => {
            check_expr_refs(cond, check_name, diags);
            check_expr_refs(then_expr, check_name, diags);
            check_expr_refs(else_expr, check_name, diags);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{Item, Sensitivity, Statement};

    fn fixture(name: &str) -> String {
        let path = format!("{}/../../corpus/listings/{name}", env!("CARGO_MANIFEST_DIR"));
        std::fs::read_to_string(path).expect("fixture exists")
    }

    fn parse_str(src: &str) -> (SourceMap, ParseResult) {
        let mut sm = SourceMap::new();
        let pr = parse_text(&mut sm, "t.v", src);
        (sm, pr)
    }

    #[test]
    fn minimal_module_no_diagnostics() {
        let (_, pr) = parse_str("module m; endmodule");
        assert!(pr.diagnostics.is_empty(), "{:?}", pr.diagnostics);
        assert_eq!(pr.ast.modules.len(), 1);
        assert_eq!(pr.ast.modules[0].name, "m");
        assert!(pr.ast.modules[0].items.is_empty());
    }

    #[test]
    fn listing1_brace_for_end() {
        let (_, pr) = parse_str(&fixture("listing1.v"));
        assert_eq!(pr.diagnostics.len(), 1, "{:?}", pr.diagnostics);
        let d = &pr.diagnostics[0];
        assert_eq!(d.rule, RuleCode::Syn000);
        assert_eq!(d.expected.as_deref(), Some("end"));
        assert_eq!(d.found.as_deref(), Some("}"));
        assert_eq!((d.span.line, d.span.col), (2, 1));
        // The always block itself survives with an empty body.
        assert_eq!(pr.ast.orphans.len(), 1);
        match &pr.ast.orphans[0] {
            Item::Always(a) => {
                assert!(matches!(a.sensitivity, Sensitivity::Star));
                assert!(a.body.is_empty());
            }
            other => panic!("expected always block, got {other:?}"),
        }
    }

    #[test]
    fn listing2_end_for_endcase() {
        let (_, pr) = parse_str(&fixture("listing2.v"));
        let ev: Vec<_> = pr
            .diagnostics
            .iter()
            .filter(|d| d.expected.as_deref() == Some("endcase"))
            .collect();
        assert_eq!(ev.len(), 1, "{:?}", pr.diagnostics);
        assert_eq!(ev[0].found.as_deref(), Some("end"));
        assert_eq!((ev[0].span.line, ev[0].span.col), (4, 1));
        // The stray semicolons are their own diagnostics.
        assert!(pr.diagnostics.len() > 1);
    }

    #[test]
    fn listing3_parses_clean_at_error_severity() {
        let (_, pr) = parse_str(&fixture("listing3.v"));
        assert!(
            !pr.diagnostics.iter().any(|d| d.is_error()),
            "{:?}",
            pr.diagnostics
        );
        // Undefined macros surface as warnings, one per use.
        let undef = pr.diagnostics.iter().filter(|d| d.rule == RuleCode::Syn002).count();
        assert_eq!(undef, 2);
        match &pr.ast.orphans[0] {
            Item::Always(a) => {
                assert_eq!(a.body.len(), 2);
                assert!(matches!(a.body[1], Statement::Case { .. }));
            }
            other => panic!("expected always block, got {other:?}"),
        }
    }

    #[test]
    fn listing4_parses_clean_at_error_severity() {
        let (_, pr) = parse_str(&fixture("listing4.v"));
        assert!(
            !pr.diagnostics.iter().any(|d| d.is_error()),
            "{:?}",
            pr.diagnostics
        );
        match &pr.ast.orphans[0] {
            Item::Always(a) => {
                match &a.sensitivity {
                    Sensitivity::Edges(e) => assert_eq!(e.len(), 2),
                    s => panic!("expected edges, got {s:?}"),
                }
                assert_eq!(a.body.len(), 2);
                assert!(matches!(a.body[0], Statement::If { .. }));
                assert!(matches!(a.body[1], Statement::Nonblocking { .. }));
                assert_eq!(a.body[1].span().line, 7);
            }
            other => panic!("expected always block, got {other:?}"),
        }
    }

    #[test]
    fn module_after_malformed_text_survives() {
        let (_, pr) = parse_str("garbage ))) tokens here\nmodule ok(input wire a, output wire b);\nassign b = a;\nendmodule\n");
        assert!(pr.ast.modules.iter().any(|m| m.name == "ok"));
        assert!(pr.diagnostics.iter().any(|d| d.is_error()));
    }

    #[test]
    fn unclosed_module_does_not_swallow_next() {
        let (_, pr) = parse_str("module broken(input wire a);\nassign x = a\nmodule ok; endmodule\n");
        let names: Vec<_> = pr.ast.modules.iter().map(|m| m.name.as_str()).collect();
        assert_eq!(names, ["broken", "ok"]);
    }

    #[test]
    fn unclosed_begin_reports_imbalance() {
        let (_, pr) = parse_str("module m(input wire c, output reg q);\nalways @(*) begin\nq = c;\nendmodule\n");
        let ev: Vec<_> = pr
            .diagnostics
            .iter()
            .filter(|d| d.expected.as_deref() == Some("end"))
            .collect();
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].found.as_deref(), Some("endmodule"));
    }

    #[test]
    fn diagnostic_flood_hard_stop() {
        // Tens of thousands of stray macro uses, each one diagnostic.
        let src = "`U ".repeat(12_000);
        let (_, pr) = parse_str(&src);
        assert!(pr.diagnostics.iter().any(|d| d.rule == RuleCode::Syn999));
        assert!(pr.diagnostics.len() <= DIAGNOSTIC_FLOOD_LIMIT + 1);
    }

    #[test]
    fn determinism() {
        let src = fixture("listing2.v");
        let (_, a) = parse_str(&src);
        let (_, b) = parse_str(&src);
        assert_eq!(a.diagnostics, b.diagnostics);
        assert!(crate::ast::structural_eq(&a.ast, &b.ast));
    }

    #[test]
    fn star_sensitivity_without_parens() {
        let (_, pr) = parse_str(
            "module m(input wire a, output reg y);\nalways @* y = a;\nendmodule\n",
        );
        assert!(!pr.has_errors(), "{:?}", pr.diagnostics);
        match &pr.ast.modules[0].items[0] {
            Item::Always(al) => assert!(matches!(al.sensitivity, Sensitivity::Star)),
            other => panic!("expected always, got {other:?}"),
        }
    }

    #[test]
    fn wire_with_initializer_desugars() {
        let (_, pr) = parse_str("module m(input wire a, output wire y);\nwire t = ~a;\nassign y = t;\nendmodule\n");
        assert!(!pr.has_errors(), "{:?}", pr.diagnostics);
        let assigns = pr.ast.modules[0]
            .items
            .iter()
            .filter(|i| matches!(i, Item::Assign(_)))
            .count();
        assert_eq!(assigns, 2);
    }
}
