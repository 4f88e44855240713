//! Lint rules for the defect classes that show up in generated Verilog:
//! begin/end and case/endcase confusion, multi-driven signals, ambiguous
//! clocking, latch inference, missing case defaults, and non-synthesizable
//! constructs.
//!
//! All files of one design are linted in a single invocation so that the
//! drive map sees every driver.

use std::collections::{BTreeMap, BTreeSet};

use crate::ast::*;
use crate::diag::{sort_diagnostics, Diagnostic, RuleCode, Severity};
use crate::parser::ParseResult;
use crate::source::Span;
use crate::token::Base;

// ---------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleSetting {
    Off,
    Warn,
    Error,
}

impl RuleSetting {
    pub fn parse(s: &str) -> Option<RuleSetting> {
        match s {
            "off" => Some(RuleSetting::Off),
            "warn" => Some(RuleSetting::Warn),
            "error" => Some(RuleSetting::Error),
            _ => None,
        }
    }
}

/// Per-rule enable/severity overrides plus the strict-pipeline flag that
/// promotes warnings to errors.
#[derive(Debug, Clone, Default)]
pub struct LintConfig {
    settings: BTreeMap<RuleCode, RuleSetting>,
    pub deny_warnings: bool,
}

impl LintConfig {
    pub fn new() -> LintConfig {
        LintConfig::default()
    }

    pub fn set(&mut self, code: RuleCode, setting: RuleSetting) {
        self.settings.insert(code, setting);
    }

    /// Parses a `CODE=off|warn|error` override. Unknown codes and levels are
    /// reported, never silently ignored.
    pub fn parse_rule_arg(&mut self, arg: &str) -> Result<(), String> {
        let (code_s, level_s) = arg
            .split_once('=')
            .ok_or_else(|| format!("rule override `{arg}` must look like CODE=off|warn|error"))?;
        let code = RuleCode::parse(code_s)
            .ok_or_else(|| format!("unknown rule code `{code_s}`"))?;
        let setting = RuleSetting::parse(level_s)
            .ok_or_else(|| format!("unknown level `{level_s}` (expected off, warn, or error)"))?;
        self.set(code, setting);
        Ok(())
    }

    fn setting(&self, code: RuleCode) -> Option<RuleSetting> {
        self.settings.get(&code).copied()
    }
}

// ---------------------------------------------------------------------
// Drive map
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriveKind {
    Blocking,
    Nonblocking,
    Continuous,
}

/// One assignment site. `range` is the selected bit range when it is a
/// compile-time constant; `None` with `whole = false` means a dynamic select.
#[derive(Debug, Clone)]
pub struct DriveSite {
    pub process: usize,
    pub span: Span,
    pub kind: DriveKind,
    pub range: Option<(u64, u64)>,
    pub whole: bool,
}

/// Signals to their drive sites, keyed by (container, signal). The container
/// is the module name, or a per-file marker for fragments outside modules.
#[derive(Debug, Default)]
pub struct DriveMap {
    pub sites: BTreeMap<(String, String), Vec<DriveSite>>,
}

/// Bit shape of an lvalue: the selected constant range, or `whole`, or a
/// dynamic select (neither).
fn site_shape(lv: &LValue, env: &dyn Fn(&str) -> Option<u64>) -> (Option<(u64, u64)>, bool) {
    match lv {
        LValue::Ident { .. } => (None, true),
        LValue::BitSelect { index, .. } => match index.const_eval(env) {
            Some(i) => (Some((i, i)), false),
            None => (None, false),
        },
        LValue::PartSelect { msb, lsb, .. } => match (msb.const_eval(env), lsb.const_eval(env)) {
            (Some(m), Some(l)) => (Some((m.max(l), m.min(l))), false),
            _ => (None, false),
        },
    }
}

impl DriveMap {
    fn record(&mut self, container: &str, lv: &LValue, process: usize, kind: DriveKind, env: &dyn Fn(&str) -> Option<u64>) {
        let (range, whole) = site_shape(lv, env);
        self.sites
            .entry((container.to_string(), lv.base_name().to_string()))
            .or_default()
            .push(DriveSite { process, span: lv.span(), kind, range, whole });
    }

    pub fn total_sites(&self) -> usize {
        self.sites.values().map(|v| v.len()).sum()
    }
}

/// Collects every assignment lvalue in the design. Recovered statements are
/// skipped, so a half-parsed region never produces phantom drivers.
pub fn build_drive_map(files: &[&ParseResult]) -> DriveMap {
    let mut map = DriveMap::default();
    let mut process = 0usize;
    for (fidx, pr) in files.iter().enumerate() {
        for m in &pr.ast.modules {
            let env = m.param_env();
            collect_items(&m.items, &m.name, &mut process, &env, &mut map);
        }
        let orphan_key = format!("<file{fidx}>");
        collect_items(&pr.ast.orphans, &orphan_key, &mut process, &|_| None, &mut map);
    }
    map
}

fn collect_items(
    items: &[Item],
    container: &str,
    process: &mut usize,
    env: &dyn Fn(&str) -> Option<u64>,
    map: &mut DriveMap,
) {
    for item in items {
        match item {
            Item::Assign(a) => {
                *process += 1;
                map.record(container, &a.target, *process, DriveKind::Continuous, env);
            }
            Item::Always(a) => {
                *process += 1;
                collect_stmts(&a.body, container, *process, env, map);
            }
            Item::Initial(i) => {
                *process += 1;
                collect_stmts(&i.body, container, *process, env, map);
            }
            Item::Stmt(s) => {
                *process += 1;
                collect_stmts(std::slice::from_ref(s), container, *process, env, map);
            }
            _ => {}
        }
    }
}

fn collect_stmts(
    stmts: &[Statement],
    container: &str,
    process: usize,
    env: &dyn Fn(&str) -> Option<u64>,
    map: &mut DriveMap,
) {
    for s in stmts {
        match s {
            Statement::Blocking { target, .. } => {
                map.record(container, target, process, DriveKind::Blocking, env)
            }
            Statement::Nonblocking { target, .. } => {
                map.record(container, target, process, DriveKind::Nonblocking, env)
            }
            Statement::If { then_branch, else_branch, .. } => {
                collect_stmts(then_branch, container, process, env, map);
                if let Some(e) = else_branch {
                    collect_stmts(e, container, process, env, map);
                }
            }
            Statement::Case { arms, default, .. } => {
                for arm in arms {
                    collect_stmts(&arm.body, container, process, env, map);
                }
                if let Some(d) = default {
                    collect_stmts(d, container, process, env, map);
                }
            }
            Statement::Block { stmts, .. } => collect_stmts(stmts, container, process, env, map),
            Statement::Delay { stmt, .. } => {
                if let Some(inner) = stmt {
                    collect_stmts(std::slice::from_ref(inner.as_ref()), container, process, env, map)
                }
            }
            Statement::Error(_) => {}
        }
    }
}

// ---------------------------------------------------------------------
// Lint driver
// ---------------------------------------------------------------------

/// Runs every enabled rule over the design. Parse-phase diagnostics are
/// folded in (with the begin/`}` and case/`end` recovery events re-tagged to
/// their rule codes) so the result is the complete, ordered report.
pub fn lint(files: &[&ParseResult], drive_map: &DriveMap, config: &LintConfig) -> Vec<Diagnostic> {
    let mut diags: Vec<Diagnostic> = Vec::new();

    for pr in files {
        for d in &pr.diagnostics {
            diags.push(retag(d.clone()));
        }
    }

    check_multi_drive(drive_map, &mut diags);

    for pr in files {
        for m in &pr.ast.modules {
            lint_container(&m.items, Some(m), &mut diags);
        }
        lint_container(&pr.ast.orphans, None, &mut diags);
    }

    // Apply configuration: enable/severity per rule, then deny-warnings.
    diags.retain(|d| config.setting(d.rule) != Some(RuleSetting::Off));
    for d in &mut diags {
        match config.setting(d.rule) {
            Some(RuleSetting::Warn) => d.severity = Severity::Warning,
            Some(RuleSetting::Error) => d.severity = Severity::Error,
            _ => {}
        }
        if config.deny_warnings && d.severity == Severity::Warning {
            d.severity = Severity::Error;
        }
    }

    sort_diagnostics(&mut diags);
    diags
}

/// Recovery events for the two block-closure confusions become their
/// dedicated rule codes.
fn retag(mut d: Diagnostic) -> Diagnostic {
    if d.rule != RuleCode::Syn000 {
        return d;
    }
    match (d.expected.as_deref(), d.found.as_deref()) {
        (Some("end"), Some("}" | "<eof>" | "endmodule")) => {
            d.rule = RuleCode::Llm001;
            d.severity = RuleCode::Llm001.default_severity();
            if d.found.as_deref() == Some("}") {
                d.hint = Some("replace `}` with `end`".to_string());
            } else {
                d.hint = Some("add the missing `end`".to_string());
            }
        }
        (Some("endcase"), Some("end" | "endmodule")) => {
            d.rule = RuleCode::Llm002;
            d.severity = RuleCode::Llm002.default_severity();
            d.hint = Some("close the case block with `endcase`".to_string());
        }
        _ => {}
    }
    d
}

// ---------------------------------------------------------------------
// LLM003: multi-drive
// ---------------------------------------------------------------------

fn check_multi_drive(map: &DriveMap, diags: &mut Vec<Diagnostic>) {
    for ((_, signal), sites) in &map.sites {
        let mut sites: Vec<&DriveSite> = sites.iter().collect();
        sites.sort_by_key(|s| (s.span.file, s.span.start));
        let first_proc = sites[0].process;
        if let Some(cross) = sites.iter().find(|s| s.process != first_proc) {
            let procs: BTreeSet<usize> = sites.iter().map(|s| s.process).collect();
            let mut d = Diagnostic::new(
                RuleCode::Llm003,
                cross.span,
                format!(
                    "signal `{signal}` is driven from {} separate always blocks or continuous assignments",
                    procs.len()
                ),
            )
            .with_hint("drive each signal from exactly one place");
            for s in &sites {
                d = d.with_related(s.span, format!("`{signal}` is assigned here"));
            }
            diags.push(d);
        }
    }
}

/// Same-process re-assignment: a later assignment on the same sequential
/// path overwrites overlapping bits written earlier, the default-then-
/// override pattern. Mutually exclusive branches never conflict. Last
/// assignment wins, which is legal, so this is a warning.
fn check_intra_reassign(
    body: &[Statement],
    env: &dyn Fn(&str) -> Option<u64>,
    diags: &mut Vec<Diagnostic>,
) {
    type Shapes = BTreeMap<String, Vec<(Option<(u64, u64)>, bool, Span)>>;

    fn shapes_overlap(a: &(Option<(u64, u64)>, bool, Span), b: &(Option<(u64, u64)>, bool, Span)) -> bool {
        if a.1 || b.1 {
            return true;
        }
        match (a.0, b.0) {
            (Some((amsb, alsb)), Some((bmsb, blsb))) => alsb <= bmsb && blsb <= amsb,
            _ => false,
        }
    }

    fn merge(into: &mut Shapes, other: Shapes) {
        for (sig, sites) in other {
            let entry = into.entry(sig).or_default();
            for s in sites {
                if !entry.iter().any(|e| e.2 == s.2) {
                    entry.push(s);
                }
            }
        }
    }

    fn walk(
        stmts: &[Statement],
        state: &mut Shapes,
        conflicts: &mut BTreeMap<String, Span>,
        env: &dyn Fn(&str) -> Option<u64>,
    ) {
        for s in stmts {
            match s {
                Statement::Blocking { target, .. } | Statement::Nonblocking { target, .. } => {
                    let (range, whole) = site_shape(target, env);
                    let site = (range, whole, target.span());
                    let name = target.base_name().to_string();
                    if let Some(prior) = state.get(&name) {
                        if prior.iter().any(|p| shapes_overlap(p, &site)) {
                            conflicts.entry(name.clone()).or_insert_with(|| target.span());
                        }
                    }
                    state.entry(name).or_default().push(site);
                }
                Statement::If { then_branch, else_branch, .. } => {
                    let mut then_state = state.clone();
                    walk(then_branch, &mut then_state, conflicts, env);
                    let mut else_state = state.clone();
                    if let Some(e) = else_branch {
                        walk(e, &mut else_state, conflicts, env);
                    }
                    merge(state, then_state);
                    merge(state, else_state);
                }
                Statement::Case { arms, default, .. } => {
                    let snapshot = state.clone();
                    for arm in arms {
                        let mut arm_state = snapshot.clone();
                        walk(&arm.body, &mut arm_state, conflicts, env);
                        merge(state, arm_state);
                    }
                    if let Some(d) = default {
                        let mut def_state = snapshot.clone();
                        walk(d, &mut def_state, conflicts, env);
                        merge(state, def_state);
                    }
                }
                Statement::Block { stmts, .. } => walk(stmts, state, conflicts, env),
                Statement::Delay { stmt, .. } => {
                    if let Some(inner) = stmt {
                        walk(std::slice::from_ref(inner.as_ref()), state, conflicts, env);
                    }
                }
                Statement::Error(_) => {}
            }
        }
    }

    let mut state = Shapes::new();
    let mut conflicts = BTreeMap::new();
    walk(body, &mut state, &mut conflicts, env);

    for (signal, span) in conflicts {
        let mut d = Diagnostic::new(
            RuleCode::Llm003,
            span,
            format!("`{signal}` is driven by different values within one block"),
        )
        .with_severity(Severity::Warning)
        .with_hint("the last assignment wins; make sure the override is intended");
        if let Some(sites) = state.get(&signal) {
            let mut sorted = sites.clone();
            sorted.sort_by_key(|s| (s.2.file, s.2.start));
            for s in sorted {
                d = d.with_related(s.2, format!("`{signal}` is assigned here"));
            }
        }
        diags.push(d);
    }
}

// ---------------------------------------------------------------------
// LLM004..LLM007 walkers
// ---------------------------------------------------------------------

fn lint_container(items: &[Item], module: Option<&ModuleDecl>, diags: &mut Vec<Diagnostic>) {
    let env = move |name: &str| module.and_then(|m| m.param_env()(name));
    for item in items {
        match item {
            Item::Always(a) => {
                match &a.sensitivity {
                    Sensitivity::Edges(edges) if edges.len() >= 2 => {
                        check_ambiguous_clock(a, edges, diags);
                    }
                    Sensitivity::Star => {
                        check_latch_inference(a, diags);
                    }
                    _ => {}
                }
                let star = matches!(a.sensitivity, Sensitivity::Star);
                check_intra_reassign(&a.body, &env, diags);
                walk_stmts(&a.body, &mut |s| check_stmt_rules(s, star, module, diags));
            }
            Item::Initial(i) => {
                diags.push(
                    Diagnostic::new(
                        RuleCode::Llm007,
                        i.span,
                        "initial blocks are not synthesizable",
                    )
                    .with_hint("move power-on state into the reset logic"),
                );
                check_intra_reassign(&i.body, &env, diags);
                walk_stmts(&i.body, &mut |s| check_stmt_rules(s, false, module, diags));
            }
            Item::Stmt(s) => {
                check_intra_reassign(std::slice::from_ref(s), &env, diags);
                walk_stmts(std::slice::from_ref(s), &mut |s| {
                    check_stmt_rules(s, true, module, diags)
                });
            }
            _ => {}
        }
    }
}

fn walk_stmts(stmts: &[Statement], f: &mut impl FnMut(&Statement)) {
    for s in stmts {
        f(s);
        match s {
            Statement::If { then_branch, else_branch, .. } => {
                walk_stmts(then_branch, f);
                if let Some(e) = else_branch {
                    walk_stmts(e, f);
                }
            }
            Statement::Case { arms, default, .. } => {
                for arm in arms {
                    walk_stmts(&arm.body, f);
                }
                if let Some(d) = default {
                    walk_stmts(d, f);
                }
            }
            Statement::Block { stmts, .. } => walk_stmts(stmts, f),
            Statement::Delay { stmt: Some(inner), .. } => {
                walk_stmts(std::slice::from_ref(inner.as_ref()), f);
            }
            _ => {}
        }
    }
}

fn check_stmt_rules(
    s: &Statement,
    in_star: bool,
    module: Option<&ModuleDecl>,
    diags: &mut Vec<Diagnostic>,
) {
    match s {
        Statement::Delay { span, .. } => {
            diags.push(
                Diagnostic::new(RuleCode::Llm007, *span, "delays are not synthesizable")
                    .with_hint("remove the `#` delay"),
            );
        }
        Statement::Case { kind, expr, arms, default, span }
            if in_star && default.is_none() && !case_is_exhaustive(*kind, expr, arms, module) =>
        {
            diags.push(
                Diagnostic::new(
                    RuleCode::Llm006,
                    *span,
                    "case in a combinational block has no default and does not cover every value",
                )
                .with_hint("add a default arm"),
            );
        }
        _ => {}
    }
}

/// LLM004. A multi-edge sensitivity list is only unambiguous in the
/// async-reset idiom: the whole body is a single if/else whose condition
/// tests one of the edge signals (either polarity). Anything else runs on
/// every listed edge.
fn check_ambiguous_clock(a: &AlwaysBlock, edges: &[EdgeEvent], diags: &mut Vec<Diagnostic>) {
    let edge_names: BTreeSet<&str> = edges.iter().map(|e| e.signal.as_str()).collect();
    let guard_ok = match a.body.first() {
        Some(Statement::If { cond, .. }) => {
            cond_tests_signal(cond, &edge_names)
        }
        _ => false,
    };
    let offending: Option<&Statement> = if a.body.is_empty() {
        None
    } else if !guard_ok {
        Some(&a.body[0])
    } else {
        a.body.get(1)
    };
    if let Some(stmt) = offending {
        diags.push(
            Diagnostic::new(
                RuleCode::Llm004,
                stmt.span(),
                "statement runs on every edge of a multi-edge sensitivity list",
            )
            .with_hint(
                "keep the body to a single if/else guarded by the reset signal, or split the block",
            ),
        );
    }
}

/// True when the condition is a (possibly negated) reference to one of the
/// given signals.
fn cond_tests_signal(cond: &Expr, names: &BTreeSet<&str>) -> bool {
    match cond {
        Expr::Ident { name, .. } => names.contains(name.as_str()),
        Expr::Unary { op: UnaryOp::LogicNot | UnaryOp::BitNot, operand, .. } => {
            cond_tests_signal(operand, names)
        }
        _ => false,
    }
}

/// LLM005. In a `@(*)` block, any signal assigned somewhere but not on every
/// path keeps its old value on the uncovered paths, which infers a latch.
fn check_latch_inference(a: &AlwaysBlock, diags: &mut Vec<Diagnostic>) {
    let mut anywhere: BTreeMap<String, Span> = BTreeMap::new();
    collect_assigned(&a.body, &mut anywhere);
    let must = must_assign(&a.body);
    for (sig, first_site) in &anywhere {
        if !must.contains(sig) {
            diags.push(
                Diagnostic::new(
                    RuleCode::Llm005,
                    *first_site,
                    format!("`{sig}` is not assigned on every path through this combinational block"),
                )
                .with_hint("assign a default value before the conditionals or cover every branch"),
            );
        }
    }
}

fn collect_assigned(stmts: &[Statement], out: &mut BTreeMap<String, Span>) {
    walk_stmts(stmts, &mut |s| {
        if let Statement::Blocking { target, .. } | Statement::Nonblocking { target, .. } = s {
            out.entry(target.base_name().to_string()).or_insert_with(|| target.span());
        }
    });
}

/// Signals assigned on every path through `stmts`, at base-name granularity.
fn must_assign(stmts: &[Statement]) -> BTreeSet<String> {
    let mut set = BTreeSet::new();
    for s in stmts {
        match s {
            Statement::Blocking { target, .. } | Statement::Nonblocking { target, .. } => {
                set.insert(target.base_name().to_string());
            }
            Statement::If { then_branch, else_branch, .. } => {
                if let Some(e) = else_branch {
                    let t = must_assign(then_branch);
                    let f = must_assign(e);
                    set.extend(t.intersection(&f).cloned());
                }
            }
            Statement::Case { arms, default, .. } => {
                if let Some(d) = default {
                    let mut acc = must_assign(d);
                    for arm in arms {
                        let b = must_assign(&arm.body);
                        acc = acc.intersection(&b).cloned().collect();
                    }
                    set.extend(acc);
                }
            }
            Statement::Block { stmts, .. } => {
                set.extend(must_assign(stmts));
            }
            Statement::Delay { stmt, .. } => {
                if let Some(inner) = stmt {
                    set.extend(must_assign(std::slice::from_ref(inner.as_ref())));
                }
            }
            Statement::Error(_) => {}
        }
    }
    set
}

// ---------------------------------------------------------------------
// LLM006 exhaustiveness
// ---------------------------------------------------------------------

fn case_is_exhaustive(
    kind: CaseKind,
    expr: &Expr,
    arms: &[CaseArm],
    module: Option<&ModuleDecl>,
) -> bool {
    let Some(width) = case_expr_width(expr, module) else {
        return false;
    };
    if width > 16 {
        return false;
    }
    let env = |name: &str| module.and_then(|m| m.param_env()(name));
    let mut patterns: Vec<(u64, u64)> = Vec::new(); // (value, care mask)
    for arm in arms {
        for label in &arm.labels {
            match label {
                Expr::Literal { number, .. } => {
                    if kind == CaseKind::Casez && number.has_xz {
                        match wildcard_pattern(number, width) {
                            Some(p) => patterns.push(p),
                            None => return false,
                        }
                    } else {
                        patterns.push((number.value & mask_of(width), mask_of(width)));
                    }
                }
                other => match other.const_eval(&env) {
                    Some(v) => patterns.push((v & mask_of(width), mask_of(width))),
                    None => return false,
                },
            }
        }
    }
    let total = 1u64 << width;
    (0..total).all(|v| patterns.iter().any(|(val, care)| (v & care) == (val & care)))
}

fn mask_of(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

/// casez pattern: (value, care mask), where x/z/? digits are don't-care.
fn wildcard_pattern(n: &crate::token::Number, width: u32) -> Option<(u64, u64)> {
    let bits_per_digit = match n.base {
        Base::Bin => 1,
        Base::Oct => 3,
        Base::Hex => 4,
        Base::Dec => return None,
    };
    let mut value: u64 = 0;
    let mut care: u64 = 0;
    for c in n.digits.chars() {
        value <<= bits_per_digit;
        care <<= bits_per_digit;
        match c {
            'x' | 'z' | '?' => {}
            c => {
                let d = c.to_digit(n.base.radix())? as u64;
                value |= d;
                care |= (1 << bits_per_digit) - 1;
            }
        }
    }
    Some((value & mask_of(width), care & mask_of(width)))
}

fn case_expr_width(expr: &Expr, module: Option<&ModuleDecl>) -> Option<u32> {
    match expr {
        Expr::Ident { name, .. } => {
            let m = module?;
            signal_width(m, name)
        }
        Expr::Literal { number, .. } => number.width,
        Expr::BitSelect { .. } => Some(1),
        Expr::PartSelect { msb, lsb, .. } => {
            let m = module?;
            let env = m.param_env();
            let msb = msb.const_eval(&env)?;
            let lsb = lsb.const_eval(&env)?;
            Some((msb.max(lsb) - msb.min(lsb) + 1) as u32)
        }
        Expr::Concat { parts, .. } => {
            let mut total = 0;
            for p in parts {
                total += case_expr_width(p, module)?;
            }
            Some(total)
        }
        _ => None,
    }
}

/// Declared width of a port or net in a module, when constant.
pub fn signal_width(m: &ModuleDecl, name: &str) -> Option<u32> {
    if let Some(p) = m.port(name) {
        return m.range_width(&p.width);
    }
    for item in &m.items {
        if let Item::Net(n) = item {
            if n.names.iter().any(|d| d.name == name) {
                return m.range_width(&n.width);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_text;
    use crate::source::SourceMap;

    fn lint_src(src: &str) -> (SourceMap, Vec<Diagnostic>) {
        lint_with(src, &LintConfig::new())
    }

    fn lint_with(src: &str, config: &LintConfig) -> (SourceMap, Vec<Diagnostic>) {
        let mut sm = SourceMap::new();
        let pr = parse_text(&mut sm, "t.v", src);
        let files = [&pr];
        let map = build_drive_map(&files);
        let diags = lint(&files, &map, config);
        (sm, diags)
    }

    fn codes(diags: &[Diagnostic]) -> Vec<RuleCode> {
        diags.iter().map(|d| d.rule).collect()
    }

    #[test]
    fn textbook_cross_process_multi_drive() {
        let (_, diags) = lint_src(
            "module m(input wire clk, input wire d, output reg q);\n\
             always @(posedge clk) q <= d;\n\
             always @(posedge clk) q <= ~d;\n\
             endmodule\n",
        );
        let llm003: Vec<_> = diags.iter().filter(|d| d.rule == RuleCode::Llm003).collect();
        assert_eq!(llm003.len(), 1);
        assert_eq!(llm003[0].severity, Severity::Error);
        assert_eq!(llm003[0].related.len(), 2);
        assert!(llm003[0].message.contains('q'));
    }

    #[test]
    fn unique_continuous_assigns_are_clean() {
        let (_, diags) = lint_src(
            "module m(input wire a, output wire x, output wire y);\n\
             assign x = a;\n\
             assign y = ~a;\n\
             endmodule\n",
        );
        assert!(codes(&diags).is_empty(), "{diags:?}");
    }

    #[test]
    fn drive_map_counts_every_lvalue_once() {
        let mut sm = SourceMap::new();
        let pr = parse_text(
            &mut sm,
            "t.v",
            "module m(input wire a, output reg [1:0] x, output wire y);\n\
             assign y = a;\n\
             always @(*) begin x[0] = a; x[1] = ~a; end\n\
             endmodule\n",
        );
        let files = [&pr];
        let map = build_drive_map(&files);
        assert_eq!(map.total_sites(), 3);
        let x_sites = &map.sites[&("m".to_string(), "x".to_string())];
        assert_eq!(x_sites.len(), 2);
        assert_eq!(x_sites[0].range, Some((0, 0)));
        assert_eq!(x_sites[1].range, Some((1, 1)));
    }

    #[test]
    fn disjoint_bits_in_one_block_are_clean() {
        let (_, diags) = lint_src(
            "module m(input wire a, output reg [1:0] x);\n\
             always @(*) begin x[0] = a; x[1] = ~a; end\n\
             endmodule\n",
        );
        assert!(!codes(&diags).contains(&RuleCode::Llm003), "{diags:?}");
    }

    #[test]
    fn ambiguous_clock_trailing_statement() {
        let (_, diags) = lint_src(
            "module m(input wire clock, input wire rstn, output reg out);\n\
             always @(posedge clock, negedge rstn) begin\n\
               if (!rstn) begin out <= 1'b1; end else begin out <= 1'b1; end\n\
               out <= 1'b0;\n\
             end\nendmodule\n",
        );
        let llm004: Vec<_> = diags.iter().filter(|d| d.rule == RuleCode::Llm004).collect();
        assert_eq!(llm004.len(), 1);
        assert_eq!(llm004[0].span.line, 4);
        assert!(llm004[0].hint.is_some());
    }

    #[test]
    fn reset_guard_idiom_is_clean() {
        let (_, diags) = lint_src(
            "module m(input wire clk, input wire rstn, input wire d, output reg q);\n\
             always @(posedge clk or negedge rstn) begin\n\
               if (!rstn) q <= 1'b0; else q <= d;\n\
             end\nendmodule\n",
        );
        assert!(!codes(&diags).contains(&RuleCode::Llm004), "{diags:?}");
    }

    #[test]
    fn latch_inference_flagged() {
        let (_, diags) = lint_src(
            "module m(input wire s, input wire a, output reg q);\n\
             always @(*) begin\n\
               if (s) q = a;\n\
             end\nendmodule\n",
        );
        let llm005: Vec<_> = diags.iter().filter(|d| d.rule == RuleCode::Llm005).collect();
        assert_eq!(llm005.len(), 1);
        assert!(llm005[0].message.contains('q'));
    }

    #[test]
    fn default_before_branches_is_clean() {
        let (_, diags) = lint_src(
            "module m(input wire s, input wire a, output reg q);\n\
             always @(*) begin\n\
               q = 1'b0;\n\
               if (s) q = a;\n\
             end\nendmodule\n",
        );
        assert!(!codes(&diags).contains(&RuleCode::Llm005), "{diags:?}");
    }

    #[test]
    fn case_without_default_warns() {
        let (_, diags) = lint_src(
            "module m(input wire [1:0] s, output reg q);\n\
             always @(*) begin\n\
               q = 1'b0;\n\
               case (s)\n\
                 2'b00: q = 1'b1;\n\
                 2'b01: q = 1'b0;\n\
               endcase\n\
             end\nendmodule\n",
        );
        assert!(codes(&diags).contains(&RuleCode::Llm006), "{diags:?}");
    }

    #[test]
    fn exhaustive_case_is_clean() {
        let (_, diags) = lint_src(
            "module m(input wire [1:0] s, output reg q);\n\
             always @(*) begin\n\
               q = 1'b0;\n\
               case (s)\n\
                 2'b00, 2'b01: q = 1'b1;\n\
                 2'b10: q = 1'b0;\n\
                 2'b11: q = 1'b1;\n\
               endcase\n\
             end\nendmodule\n",
        );
        assert!(!codes(&diags).contains(&RuleCode::Llm006), "{diags:?}");
    }

    #[test]
    fn casez_wildcards_count_as_coverage() {
        let (_, diags) = lint_src(
            "module m(input wire [1:0] s, output reg q);\n\
             always @(*) begin\n\
               q = 1'b0;\n\
               casez (s)\n\
                 2'b0z: q = 1'b1;\n\
                 2'b1z: q = 1'b0;\n\
               endcase\n\
             end\nendmodule\n",
        );
        assert!(!codes(&diags).contains(&RuleCode::Llm006), "{diags:?}");
    }

    #[test]
    fn initial_and_delay_warn() {
        let (_, diags) = lint_src(
            "module m(output reg q);\n\
             initial begin\n\
               q = 1'b0;\n\
               #10;\n\
             end\nendmodule\n",
        );
        let llm007 = diags.iter().filter(|d| d.rule == RuleCode::Llm007).count();
        assert_eq!(llm007, 2);
    }

    #[test]
    fn rule_off_removes_exactly_that_rule() {
        let src = "module m(input wire s, input wire a, output reg q);\n\
             always @(*) begin\n\
               if (s) q = a;\n\
               #5;\n\
             end\nendmodule\n";
        let (_, before) = lint_src(src);
        assert!(codes(&before).contains(&RuleCode::Llm005));
        assert!(codes(&before).contains(&RuleCode::Llm007));
        let mut config = LintConfig::new();
        config.parse_rule_arg("LLM005=off").unwrap();
        let (_, after) = lint_with(src, &config);
        assert!(!codes(&after).contains(&RuleCode::Llm005));
        assert!(codes(&after).contains(&RuleCode::Llm007));
        assert_eq!(before.len(), after.len() + 1);
    }

    #[test]
    fn deny_warnings_promotes() {
        let src = "module m(output reg q);\ninitial q = 1'b0;\nendmodule\n";
        let mut config = LintConfig::new();
        config.deny_warnings = true;
        let (_, diags) = lint_with(src, &config);
        assert!(diags.iter().all(|d| d.severity == Severity::Error));
        assert!(codes(&diags).contains(&RuleCode::Llm007));
    }

    #[test]
    fn unknown_rule_code_is_reported() {
        let mut config = LintConfig::new();
        let err = config.parse_rule_arg("LLM042=off").unwrap_err();
        assert!(err.contains("LLM042"));
    }
}
