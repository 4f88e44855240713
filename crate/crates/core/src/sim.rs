//! Cycle-accurate two-state simulation of the synthesizable subset.
//!
//! `elaborate` flattens the instance tree under a chosen top into signal and
//! process tables; `run` drives one implicit clock (one rising edge per
//! cycle), settles combinational logic to a fixed point between edges, and
//! commits edge-triggered assignments atomically so process order never
//! matters. Values are unsigned two-state; x/z literals fold to 0 with a
//! warning.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Deserialize;
use thiserror::Error;

use crate::ast::{self, CaseKind, Connections, EdgePolarity, Expr, Item, LValue, Sensitivity, Statement};
use crate::diag::{Diagnostic, RuleCode};
use crate::parser::ParseResult;
use crate::source::Span;

/// Sweep bound for combinational settling. Acyclic graphs settle in at most
/// their depth; hitting the bound means a cycle slipped past elaboration
/// through select aliasing.
pub const MAX_SETTLE_SWEEPS: usize = 1000;

pub type SignalId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalKind {
    /// Top-level input, writable by stimulus.
    Input,
    /// Written by an edge-triggered process.
    State,
    Comb,
}

#[derive(Debug, Clone)]
pub struct SignalInfo {
    pub name: String,
    pub width: u32,
    pub kind: SignalKind,
}

// ---------------------------------------------------------------------
// Compiled expression/statement IR
// ---------------------------------------------------------------------

#[derive(Debug, Clone)]
pub(crate) enum SExpr {
    Const { value: u64, width: u32 },
    Sig(SignalId),
    Unary { op: ast::UnaryOp, operand: Box<SExpr>, width: u32 },
    Binary { op: ast::BinaryOp, lhs: Box<SExpr>, rhs: Box<SExpr>, width: u32 },
    BitSel { sig: SignalId, index: Box<SExpr> },
    PartSel { sig: SignalId, msb: u32, lsb: u32 },
    Concat { parts: Vec<SExpr>, width: u32 },
    Ternary { cond: Box<SExpr>, then_e: Box<SExpr>, else_e: Box<SExpr>, width: u32 },
}

impl SExpr {
    fn width(&self, signals: &[SignalInfo]) -> u32 {
        match self {
            SExpr::Const { width, .. } => *width,
            SExpr::Sig(id) => signals[*id].width,
            SExpr::Unary { width, .. }
            | SExpr::Binary { width, .. }
            | SExpr::Concat { width, .. }
            | SExpr::Ternary { width, .. } => *width,
            SExpr::BitSel { .. } => 1,
            SExpr::PartSel { msb, lsb, .. } => msb - lsb + 1,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum STarget {
    Whole(SignalId),
    Bit(SignalId, SExpr),
    Part(SignalId, u32, u32),
}

impl STarget {
    fn sig(&self) -> SignalId {
        match self {
            STarget::Whole(s) | STarget::Bit(s, _) | STarget::Part(s, _, _) => *s,
        }
    }
}

/// A case label plus its care mask (for casez wildcard patterns).
#[derive(Debug, Clone)]
pub(crate) struct SLabel {
    expr: SExpr,
    care: Option<u64>,
}

#[derive(Debug, Clone)]
pub(crate) enum SStmt {
    Assign { target: STarget, value: SExpr },
    If { cond: SExpr, then_s: Vec<SStmt>, else_s: Vec<SStmt> },
    Case { expr: SExpr, arms: Vec<(Vec<SLabel>, Vec<SStmt>)>, default: Vec<SStmt> },
}

#[derive(Debug, Clone)]
pub(crate) struct Process {
    pub(crate) body: Vec<SStmt>,
    reads: BTreeSet<SignalId>,
    writes: Vec<SignalId>,
    /// For edge-triggered processes: the top-level signal the clock edge
    /// aliases to, and the reset root when the body is reset-guarded.
    reset_root: Option<SignalId>,
}

/// A flattened, schedulable design.
#[derive(Debug)]
pub struct ElaboratedDesign {
    pub signals: Vec<SignalInfo>,
    by_name: BTreeMap<String, SignalId>,
    /// Combinational processes in topological order.
    pub(crate) comb: Vec<Process>,
    pub(crate) seq: Vec<Process>,
    pub top: String,
    /// Name of the top-level clock input all edge processes alias to.
    pub clock: Option<String>,
    pub warnings: Vec<Diagnostic>,
}

impl ElaboratedDesign {
    pub fn signal_id(&self, name: &str) -> Option<SignalId> {
        self.by_name.get(name).copied()
    }

    pub fn signal_names(&self) -> impl Iterator<Item = &str> {
        self.signals.iter().map(|s| s.name.as_str())
    }

    pub fn comb_process_count(&self) -> usize {
        self.comb.len()
    }

    pub fn seq_process_count(&self) -> usize {
        self.seq.len()
    }
}

// ---------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------

#[derive(Debug, Error)]
pub enum SimError {
    #[error("sources contain error-severity diagnostics; fix them before simulating")]
    SourceErrors,
    #[error("top module `{0}` not found")]
    UnknownTop(String),
    #[error("module `{0}` is defined more than once")]
    DuplicateModule(String),
    #[error("instance `{instance}` references unknown module `{module}`")]
    UnresolvedInstance { module: String, instance: String },
    #[error("instance `{instance}` of `{module}`: expected {expected} connections, found {found}")]
    PortCountMismatch { module: String, instance: String, expected: usize, found: usize },
    #[error("instance `{instance}`: module `{module}` has no port `{port}`")]
    UnknownPort { module: String, instance: String, port: String },
    #[error("inout ports are not supported (port `{0}`)")]
    InoutUnsupported(String),
    #[error("width of `{0}` is not a compile-time constant")]
    NonConstWidth(String),
    #[error("signal `{0}` is {1} bits wide; at most 64 are supported")]
    WidthTooLarge(String, u32),
    #[error("output port `{port}` of `{instance}` must connect to a signal or constant select")]
    OutputConnNotLValue { instance: String, port: String },
    #[error("combinational cycle through: {}", .0.join(", "))]
    CombinationalCycle(Vec<String>),
    #[error("multiple clocks detected: {}", .0.join(", "))]
    MultiClock(Vec<String>),
    #[error("cannot identify the clock of an always block in `{0}`: multi-edge lists need a reset-guarded body")]
    AmbiguousClock(String),
    #[error("clock of `{0}` does not trace back to a 1-bit top-level input")]
    ClockNotTopInput(String),
    #[error("unknown identifier `{0}` in `{1}`")]
    UnknownIdent(String, String),
    #[error("combinational instability: no fixed point after {MAX_SETTLE_SWEEPS} sweeps")]
    Instability,
    #[error("cycle count must be at least 1")]
    ZeroCycles,
    #[error("reset must be asserted for at least 1 cycle")]
    ZeroResetCycles,
    #[error("stimulus targets unknown signal `{0}`")]
    StimulusUnknownSignal(String),
    #[error("stimulus targets `{0}`, which is not a top-level input")]
    StimulusNotAnInput(String),
    #[error("stimulus value {value} does not fit `{signal}` ({width} bits)")]
    StimulusValueTooWide { signal: String, value: u64, width: u32 },
    #[error("recorded signal `{0}` does not exist")]
    UnknownRecordSignal(String),
    #[error("invalid stimulus: {0}")]
    BadStimulus(String),
}

// ---------------------------------------------------------------------
// Stimulus
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActiveLevel {
    Low,
    High,
}

#[derive(Debug, Clone, Deserialize)]
pub struct StimulusWrite {
    pub signal: String,
    pub cycle: u64,
    pub value: u64,
}

/// Reset protocol plus scheduled input writes. The reset signal is forced to
/// its active level for the first `reset_cycles` cycles and released after.
#[derive(Debug, Clone, Deserialize)]
pub struct Stimulus {
    #[serde(default = "default_reset_cycles")]
    pub reset_cycles: u64,
    #[serde(default = "default_reset_signal")]
    pub reset_signal: String,
    #[serde(default = "default_reset_active")]
    pub reset_active: ActiveLevel,
    #[serde(default)]
    pub writes: Vec<StimulusWrite>,
}

fn default_reset_cycles() -> u64 {
    4
}

fn default_reset_signal() -> String {
    "rstn".to_string()
}

fn default_reset_active() -> ActiveLevel {
    ActiveLevel::Low
}

impl Default for Stimulus {
    fn default() -> Stimulus {
        Stimulus {
            reset_cycles: default_reset_cycles(),
            reset_signal: default_reset_signal(),
            reset_active: default_reset_active(),
            writes: Vec::new(),
        }
    }
}

impl Stimulus {
    pub fn from_json(bytes: &[u8]) -> Result<Stimulus, SimError> {
        serde_json::from_slice(bytes).map_err(|e| SimError::BadStimulus(e.to_string()))
    }

    pub fn write(mut self, signal: &str, cycle: u64, value: u64) -> Stimulus {
        self.writes.push(StimulusWrite { signal: signal.to_string(), cycle, value });
        self
    }
}

// ---------------------------------------------------------------------
// Trace
// ---------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSignal {
    pub name: String,
    pub width: u32,
    pub values: Vec<u64>,
}

/// Per-cycle values of a set of named signals, sampled after settling.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    signals: Vec<TraceSignal>,
    rows: usize,
}

impl Trace {
    pub fn new(capacity: usize) -> Trace {
        let _ = capacity;
        Trace::default()
    }

    pub fn add_signal(&mut self, name: &str, width: u32) {
        self.signals.push(TraceSignal { name: name.to_string(), width, values: Vec::new() });
    }

    pub fn push_row(&mut self, values: &[u64]) {
        assert_eq!(values.len(), self.signals.len(), "one value per signal");
        for (s, v) in self.signals.iter_mut().zip(values) {
            debug_assert!(s.width >= 64 || *v < (1u64 << s.width), "value exceeds width");
            s.values.push(*v);
        }
        self.rows += 1;
    }

    pub fn cycles(&self) -> usize {
        self.rows
    }

    pub fn signals(&self) -> &[TraceSignal] {
        &self.signals
    }

    pub fn signal(&self, name: &str) -> Option<&TraceSignal> {
        self.signals.iter().find(|s| s.name == name)
    }

    /// Test helper: toggles bit 0 of one sample.
    pub fn flip_bit(&mut self, name: &str, cycle: usize) {
        let s = self.signals.iter_mut().find(|s| s.name == name).expect("signal exists");
        s.values[cycle] ^= 1;
    }

    /// CSV export: a `cycle` column followed by one decimal column per
    /// signal.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cycle");
        for s in &self.signals {
            out.push(',');
            out.push_str(&s.name);
        }
        out.push('\n');
        for t in 0..self.rows {
            out.push_str(&t.to_string());
            for s in &self.signals {
                out.push(',');
                out.push_str(&s.values[t].to_string());
            }
            out.push('\n');
        }
        out
    }
}

// ---------------------------------------------------------------------
// Elaboration
// ---------------------------------------------------------------------

struct Elaborator<'a> {
    modules: BTreeMap<&'a str, &'a ast::ModuleDecl>,
    signals: Vec<SignalInfo>,
    by_name: BTreeMap<String, SignalId>,
    comb: Vec<Process>,
    seq: Vec<Process>,
    /// dst -> src for pure whole-signal input bindings, used to trace clock
    /// and reset roots through the hierarchy.
    aliases: BTreeMap<SignalId, SignalId>,
    warnings: Vec<Diagnostic>,
    xz_warned: bool,
    /// (clock signal, edge polarity, module name) per edge process, in
    /// process order; resolved to roots after flattening.
    seq_clocks: Vec<(SignalId, EdgePolarity, String)>,
}

/// Flattens `top` and compiles every process. Inputs must be free of
/// error-severity diagnostics.
pub fn elaborate(files: &[&ParseResult], top: &str) -> Result<ElaboratedDesign, SimError> {
    if files.iter().any(|f| f.has_errors()) {
        return Err(SimError::SourceErrors);
    }
    let mut modules: BTreeMap<&str, &ast::ModuleDecl> = BTreeMap::new();
    for f in files {
        for m in &f.ast.modules {
            if modules.insert(m.name.as_str(), m).is_some() {
                return Err(SimError::DuplicateModule(m.name.clone()));
            }
        }
    }
    let top_decl = *modules.get(top).ok_or_else(|| SimError::UnknownTop(top.to_string()))?;

    let mut el = Elaborator {
        modules,
        signals: Vec::new(),
        by_name: BTreeMap::new(),
        comb: Vec::new(),
        seq: Vec::new(),
        aliases: BTreeMap::new(),
        warnings: Vec::new(),
        xz_warned: false,
        seq_clocks: Vec::new(),
    };
    el.instantiate(top_decl, "", true)?;

    // State classification: anything an edge process writes.
    for p in &el.seq {
        for w in &p.writes {
            if el.signals[*w].kind == SignalKind::Comb {
                el.signals[*w].kind = SignalKind::State;
            }
        }
    }

    // Single-clock check: every edge process's clock must alias to the same
    // 1-bit top-level input.
    let mut clock: Option<SignalId> = None;
    let mut clock_names: BTreeSet<String> = BTreeSet::new();
    for (sig, polarity, module) in el.seq_clocks.clone() {
        let root = el.root_of(sig);
        if el.signals[root].kind != SignalKind::Input || el.signals[root].width != 1 {
            return Err(SimError::ClockNotTopInput(module));
        }
        if polarity == EdgePolarity::Neg {
            el.warnings.push(Diagnostic::new(
                RuleCode::Syn004,
                Span::dummy(),
                format!("negedge clock in `{module}` is treated as the cycle edge"),
            ));
        }
        clock_names.insert(el.signals[root].name.clone());
        match clock {
            None => clock = Some(root),
            Some(c) if c == root => {}
            Some(_) => {
                return Err(SimError::MultiClock(clock_names.into_iter().collect()));
            }
        }
    }

    // Resolve seq reset roots through aliases.
    for p in &mut el.seq {
        if let Some(r) = p.reset_root {
            let mut root = r;
            let mut hops = 0;
            while let Some(&src) = el.aliases.get(&root) {
                root = src;
                hops += 1;
                if hops > el.signals.len() {
                    break;
                }
            }
            p.reset_root = Some(root);
        }
    }

    let comb = toposort_comb(std::mem::take(&mut el.comb), &el.signals)?;

    let clock_name = clock.map(|c| el.signals[c].name.clone());
    Ok(ElaboratedDesign {
        signals: el.signals,
        by_name: el.by_name,
        comb,
        seq: el.seq,
        top: top.to_string(),
        clock: clock_name,
        warnings: el.warnings,
    })
}

impl<'a> Elaborator<'a> {
    fn root_of(&self, sig: SignalId) -> SignalId {
        let mut root = sig;
        let mut hops = 0;
        while let Some(&src) = self.aliases.get(&root) {
            root = src;
            hops += 1;
            if hops > self.signals.len() {
                break;
            }
        }
        root
    }

    fn qualified(prefix: &str, name: &str) -> String {
        if prefix.is_empty() {
            name.to_string()
        } else {
            format!("{prefix}.{name}")
        }
    }

    fn declare(&mut self, name: String, width: u32, kind: SignalKind) -> Result<SignalId, SimError> {
        if width == 0 || width > 64 {
            return Err(SimError::WidthTooLarge(name, width));
        }
        if let Some(&id) = self.by_name.get(&name) {
            return Ok(id);
        }
        let id = self.signals.len();
        self.signals.push(SignalInfo { name: name.clone(), width, kind });
        self.by_name.insert(name, id);
        Ok(id)
    }

    fn instantiate(
        &mut self,
        m: &'a ast::ModuleDecl,
        prefix: &str,
        is_top: bool,
    ) -> Result<(), SimError> {
        // Declare ports, then nets.
        for p in &m.ports {
            if p.dir == ast::PortDir::Inout {
                return Err(SimError::InoutUnsupported(Self::qualified(prefix, &p.name)));
            }
            let width = m
                .range_width(&p.width)
                .ok_or_else(|| SimError::NonConstWidth(Self::qualified(prefix, &p.name)))?;
            let kind = if is_top && p.dir == ast::PortDir::Input {
                SignalKind::Input
            } else {
                SignalKind::Comb
            };
            self.declare(Self::qualified(prefix, &p.name), width, kind)?;
        }
        for item in &m.items {
            if let Item::Net(n) = item {
                let width = m
                    .range_width(&n.width)
                    .ok_or_else(|| SimError::NonConstWidth(format!("{prefix} net")))?;
                for d in &n.names {
                    self.declare(Self::qualified(prefix, &d.name), width, SignalKind::Comb)?;
                }
            }
        }

        for item in &m.items {
            match item {
                Item::Assign(a) => {
                    let body = vec![self.compile_assign(&a.target, &a.value, m, prefix, false)?];
                    self.push_comb(body);
                }
                Item::Always(a) => match &a.sensitivity {
                    Sensitivity::Star => {
                        let body = self.compile_stmts(&a.body, m, prefix)?;
                        self.push_comb(body);
                    }
                    Sensitivity::Edges(edges) => {
                        self.compile_edge_process(a, edges, m, prefix)?;
                    }
                },
                Item::Initial(i) => {
                    self.warnings.push(Diagnostic::new(
                        RuleCode::Syn004,
                        i.span,
                        format!(
                            "initial block in `{}` is ignored by the simulator",
                            if prefix.is_empty() { &m.name } else { prefix }
                        ),
                    ));
                }
                Item::Instance(inst) => {
                    self.instantiate_child(inst, m, prefix)?;
                }
                Item::Net(_) | Item::Param(_) => {}
                Item::Stmt(_) | Item::Error(_) => {
                    // Unreachable on error-free sources.
                }
            }
        }
        Ok(())
    }

    fn instantiate_child(
        &mut self,
        inst: &'a ast::Instantiation,
        parent: &'a ast::ModuleDecl,
        prefix: &str,
    ) -> Result<(), SimError> {
        let child = *self.modules.get(inst.module.as_str()).ok_or_else(|| {
            SimError::UnresolvedInstance { module: inst.module.clone(), instance: inst.instance.clone() }
        })?;
        let child_prefix = Self::qualified(prefix, &inst.instance);
        self.instantiate(child, &child_prefix, false)?;

        // Pair up connections.
        let pairs: Vec<(&ast::PortDecl, Option<&Expr>)> = match &inst.conns {
            Connections::Positional(exprs) => {
                if exprs.len() != child.ports.len() {
                    return Err(SimError::PortCountMismatch {
                        module: inst.module.clone(),
                        instance: inst.instance.clone(),
                        expected: child.ports.len(),
                        found: exprs.len(),
                    });
                }
                child.ports.iter().zip(exprs.iter().map(Some)).collect()
            }
            Connections::Named(named) => {
                for n in named {
                    if child.port(&n.port).is_none() {
                        return Err(SimError::UnknownPort {
                            module: inst.module.clone(),
                            instance: inst.instance.clone(),
                            port: n.port.clone(),
                        });
                    }
                }
                child
                    .ports
                    .iter()
                    .map(|p| {
                        let conn =
                            named.iter().find(|n| n.port == p.name).and_then(|n| n.expr.as_ref());
                        (p, conn)
                    })
                    .collect()
            }
        };

        for (port, conn) in pairs {
            let child_sig = self.by_name[&Self::qualified(&child_prefix, &port.name)];
            match (port.dir, conn) {
                (ast::PortDir::Input, Some(expr)) => {
                    // child input := parent expression
                    let value = self.compile_expr(expr, parent, prefix)?;
                    if let SExpr::Sig(src) = value {
                        self.aliases.insert(child_sig, src);
                    }
                    let body = vec![SStmt::Assign { target: STarget::Whole(child_sig), value }];
                    self.push_comb(body);
                }
                (ast::PortDir::Input, None) => {
                    self.warnings.push(Diagnostic::new(
                        RuleCode::Syn004,
                        inst.span,
                        format!(
                            "input `{}` of `{}` is unconnected and ties to 0",
                            port.name, inst.instance
                        ),
                    ));
                }
                (ast::PortDir::Output, Some(expr)) => {
                    // parent lvalue := child output
                    let target = match expr {
                        Expr::Ident { name, .. } => {
                            STarget::Whole(self.lookup(name, parent, prefix)?)
                        }
                        Expr::BitSelect { base, index, .. } => {
                            let sig = self.lookup(base, parent, prefix)?;
                            let idx = self.compile_expr(index, parent, prefix)?;
                            STarget::Bit(sig, idx)
                        }
                        Expr::PartSelect { base, msb, lsb, .. } => {
                            let sig = self.lookup(base, parent, prefix)?;
                            let env = parent.param_env();
                            let (m, l) = match (msb.const_eval(&env), lsb.const_eval(&env)) {
                                (Some(m), Some(l)) => (m.max(l) as u32, m.min(l) as u32),
                                _ => {
                                    return Err(SimError::OutputConnNotLValue {
                                        instance: inst.instance.clone(),
                                        port: port.name.clone(),
                                    })
                                }
                            };
                            STarget::Part(sig, m, l)
                        }
                        _ => {
                            return Err(SimError::OutputConnNotLValue {
                                instance: inst.instance.clone(),
                                port: port.name.clone(),
                            })
                        }
                    };
                    if let STarget::Whole(dst) = &target {
                        self.aliases.entry(*dst).or_insert(child_sig);
                    }
                    let body =
                        vec![SStmt::Assign { target, value: SExpr::Sig(child_sig) }];
                    self.push_comb(body);
                }
                (ast::PortDir::Output, None) => {}
                (ast::PortDir::Inout, _) => {
                    return Err(SimError::InoutUnsupported(port.name.clone()));
                }
            }
        }
        Ok(())
    }

    fn compile_edge_process(
        &mut self,
        a: &ast::AlwaysBlock,
        edges: &[ast::EdgeEvent],
        m: &'a ast::ModuleDecl,
        prefix: &str,
    ) -> Result<(), SimError> {
        let scope_name = if prefix.is_empty() { m.name.clone() } else { prefix.to_string() };
        // The reset is the edge signal the body's guard tests; the clock is
        // the other edge.
        let guard_signal = match a.body.first() {
            Some(Statement::If { cond, .. }) => tested_signal(cond),
            _ => None,
        };
        let (clock_edge, reset_edge) = match edges.len() {
            1 => (&edges[0], None),
            2 => {
                let guarded = guard_signal
                    .as_deref()
                    .and_then(|g| edges.iter().position(|e| e.signal == g));
                match guarded {
                    Some(i) => (&edges[1 - i], Some(&edges[i])),
                    None => return Err(SimError::AmbiguousClock(scope_name)),
                }
            }
            _ => return Err(SimError::AmbiguousClock(scope_name)),
        };
        let clock_sig = self.lookup(&clock_edge.signal, m, prefix)?;
        let reset_root = match reset_edge {
            Some(e) => Some(self.lookup(&e.signal, m, prefix)?),
            None => None,
        };
        let body = self.compile_stmts(&a.body, m, prefix)?;
        let mut reads = BTreeSet::new();
        let mut writes = Vec::new();
        scan_body(&body, &mut reads, &mut writes);
        self.seq_clocks.push((clock_sig, clock_edge.polarity, scope_name));
        self.seq.push(Process { body, reads, writes, reset_root });
        Ok(())
    }

    fn push_comb(&mut self, body: Vec<SStmt>) {
        let mut reads = BTreeSet::new();
        let mut writes = Vec::new();
        scan_body(&body, &mut reads, &mut writes);
        self.comb.push(Process { body, reads, writes, reset_root: None });
    }

    fn lookup(
        &self,
        name: &str,
        m: &ast::ModuleDecl,
        prefix: &str,
    ) -> Result<SignalId, SimError> {
        self.by_name
            .get(&Self::qualified(prefix, name))
            .copied()
            .ok_or_else(|| SimError::UnknownIdent(name.to_string(), m.name.clone()))
    }

    fn compile_assign(
        &mut self,
        target: &LValue,
        value: &Expr,
        m: &'a ast::ModuleDecl,
        prefix: &str,
        _nonblocking: bool,
    ) -> Result<SStmt, SimError> {
        let starget = self.compile_target(target, m, prefix)?;
        let value = self.compile_expr(value, m, prefix)?;
        Ok(SStmt::Assign { target: starget, value })
    }

    fn compile_target(
        &mut self,
        target: &LValue,
        m: &'a ast::ModuleDecl,
        prefix: &str,
    ) -> Result<STarget, SimError> {
        let env = m.param_env();
        Ok(match target {
            LValue::Ident { name, .. } => STarget::Whole(self.lookup(name, m, prefix)?),
            LValue::BitSelect { base, index, .. } => {
                let sig = self.lookup(base, m, prefix)?;
                match index.const_eval(&env) {
                    Some(i) => STarget::Part(sig, i as u32, i as u32),
                    None => {
                        let idx = self.compile_expr(index, m, prefix)?;
                        STarget::Bit(sig, idx)
                    }
                }
            }
            LValue::PartSelect { base, msb, lsb, .. } => {
                let sig = self.lookup(base, m, prefix)?;
                let (mv, lv) = match (msb.const_eval(&env), lsb.const_eval(&env)) {
                    (Some(a), Some(b)) => (a.max(b) as u32, a.min(b) as u32),
                    _ => return Err(SimError::NonConstWidth(format!("part-select of {base}"))),
                };
                STarget::Part(sig, mv, lv)
            }
        })
    }

    fn compile_stmts(
        &mut self,
        stmts: &[Statement],
        m: &'a ast::ModuleDecl,
        prefix: &str,
    ) -> Result<Vec<SStmt>, SimError> {
        let mut out = Vec::new();
        for s in stmts {
            match s {
                Statement::Blocking { target, value, .. } => {
                    out.push(self.compile_assign(target, value, m, prefix, false)?);
                }
                Statement::Nonblocking { target, value, .. } => {
                    out.push(self.compile_assign(target, value, m, prefix, true)?);
                }
                Statement::If { cond, then_branch, else_branch, .. } => {
                    let cond = self.compile_expr(cond, m, prefix)?;
                    let then_s = self.compile_stmts(then_branch, m, prefix)?;
                    let else_s = match else_branch {
                        Some(e) => self.compile_stmts(e, m, prefix)?,
                        None => Vec::new(),
                    };
                    out.push(SStmt::If { cond, then_s, else_s });
                }
                Statement::Case { kind, expr, arms, default, .. } => {
                    let sexpr = self.compile_expr(expr, m, prefix)?;
                    let mut sarms = Vec::new();
                    for arm in arms {
                        let mut labels = Vec::new();
                        for l in &arm.labels {
                            let care = match (kind, l) {
                                (CaseKind::Casez, Expr::Literal { number, .. })
                                    if number.has_xz =>
                                {
                                    wildcard_care(number)
                                }
                                _ => None,
                            };
                            labels.push(SLabel { expr: self.compile_expr(l, m, prefix)?, care });
                        }
                        let body = self.compile_stmts(&arm.body, m, prefix)?;
                        sarms.push((labels, body));
                    }
                    let default = match default {
                        Some(d) => self.compile_stmts(d, m, prefix)?,
                        None => Vec::new(),
                    };
                    out.push(SStmt::Case { expr: sexpr, arms: sarms, default });
                }
                Statement::Block { stmts, .. } => {
                    out.extend(self.compile_stmts(stmts, m, prefix)?);
                }
                Statement::Delay { stmt, span, .. } => {
                    self.warnings.push(Diagnostic::new(
                        RuleCode::Syn004,
                        *span,
                        "delay ignored by the cycle simulator",
                    ));
                    if let Some(inner) = stmt {
                        out.extend(
                            self.compile_stmts(std::slice::from_ref(inner.as_ref()), m, prefix)?,
                        );
                    }
                }
                Statement::Error(_) => {}
            }
        }
        Ok(out)
    }

    fn compile_expr(
        &mut self,
        e: &Expr,
        m: &'a ast::ModuleDecl,
        prefix: &str,
    ) -> Result<SExpr, SimError> {
        let env = m.param_env();
        Ok(match e {
            Expr::Literal { number, .. } => {
                if number.has_xz && !self.xz_warned {
                    self.xz_warned = true;
                    self.warnings.push(Diagnostic::new(
                        RuleCode::Syn004,
                        e.span(),
                        "x/z literal digits are treated as 0 (two-state simulation)",
                    ));
                }
                let width = number.width.unwrap_or(32);
                SExpr::Const { value: number.value & mask(width), width }
            }
            Expr::Ident { name, .. } => {
                // Parameters fold to constants.
                if let Some(v) = env(name) {
                    SExpr::Const { value: v & mask(32), width: 32 }
                } else {
                    SExpr::Sig(self.lookup(name, m, prefix)?)
                }
            }
            Expr::Unary { op, operand, .. } => {
                let inner = self.compile_expr(operand, m, prefix)?;
                let width = match op {
                    ast::UnaryOp::LogicNot
                    | ast::UnaryOp::RedAnd
                    | ast::UnaryOp::RedOr
                    | ast::UnaryOp::RedXor => 1,
                    ast::UnaryOp::BitNot | ast::UnaryOp::Neg => inner.width(&self.signals),
                };
                SExpr::Unary { op: *op, operand: Box::new(inner), width }
            }
            Expr::Binary { op, lhs, rhs, .. } => {
                let l = self.compile_expr(lhs, m, prefix)?;
                let r = self.compile_expr(rhs, m, prefix)?;
                let width = binary_width(*op, &l, &r, &self.signals);
                SExpr::Binary { op: *op, lhs: Box::new(l), rhs: Box::new(r), width }
            }
            Expr::BitSelect { base, index, .. } => {
                let sig = self.lookup(base, m, prefix)?;
                match index.const_eval(&env) {
                    Some(i) => {
                        let w = self.signals[sig].width;
                        if (i as u32) < w {
                            SExpr::PartSel { sig, msb: i as u32, lsb: i as u32 }
                        } else {
                            SExpr::Const { value: 0, width: 1 }
                        }
                    }
                    None => SExpr::BitSel {
                        sig,
                        index: Box::new(self.compile_expr(index, m, prefix)?),
                    },
                }
            }
            Expr::PartSelect { base, msb, lsb, .. } => {
                let sig = self.lookup(base, m, prefix)?;
                let (mv, lv) = match (msb.const_eval(&env), lsb.const_eval(&env)) {
                    (Some(a), Some(b)) => (a.max(b) as u32, a.min(b) as u32),
                    _ => return Err(SimError::NonConstWidth(format!("part-select of {base}"))),
                };
                SExpr::PartSel { sig, msb: mv, lsb: lv }
            }
            Expr::Concat { parts, .. } => {
                let mut sparts = Vec::new();
                let mut width = 0;
                for p in parts {
                    let sp = self.compile_expr(p, m, prefix)?;
                    width += sp.width(&self.signals);
                    sparts.push(sp);
                }
                SExpr::Concat { parts: sparts, width }
            }
            Expr::Repeat { count, inner, .. } => {
                let n = count
                    .const_eval(&env)
                    .ok_or_else(|| SimError::NonConstWidth("repetition count".into()))? as u32;
                let mut sparts = Vec::new();
                let mut unit_width = 0;
                for p in inner {
                    let sp = self.compile_expr(p, m, prefix)?;
                    unit_width += sp.width(&self.signals);
                    sparts.push(sp);
                }
                let mut all = Vec::new();
                for _ in 0..n {
                    all.extend(sparts.iter().cloned());
                }
                SExpr::Concat { parts: all, width: n * unit_width }
            }
            Expr::Ternary { cond, then_expr, else_expr, .. } => {
                let c = self.compile_expr(cond, m, prefix)?;
                let t = self.compile_expr(then_expr, m, prefix)?;
                let f = self.compile_expr(else_expr, m, prefix)?;
                let width = t.width(&self.signals).max(f.width(&self.signals));
                SExpr::Ternary {
                    cond: Box::new(c),
                    then_e: Box::new(t),
                    else_e: Box::new(f),
                    width,
                }
            }
            Expr::Error(_) => SExpr::Const { value: 0, width: 1 },
        })
    }
}

fn tested_signal(cond: &Expr) -> Option<String> {
    match cond {
        Expr::Ident { name, .. } => Some(name.clone()),
        Expr::Unary { op: ast::UnaryOp::LogicNot | ast::UnaryOp::BitNot, operand, .. } => {
            tested_signal(operand)
        }
        _ => None,
    }
}

/// casez care mask from the literal digits.
fn wildcard_care(n: &crate::token::Number) -> Option<u64> {
    let bits = match n.base {
        crate::token::Base::Bin => 1,
        crate::token::Base::Oct => 3,
        crate::token::Base::Hex => 4,
        crate::token::Base::Dec => return None,
    };
    let mut care: u64 = 0;
    for c in n.digits.chars() {
        care <<= bits;
        if !matches!(c, 'x' | 'z' | '?') {
            care |= (1 << bits) - 1;
        }
    }
    Some(care)
}

fn binary_width(op: ast::BinaryOp, l: &SExpr, r: &SExpr, signals: &[SignalInfo]) -> u32 {
    use ast::BinaryOp::*;
    match op {
        Add | Sub | BitAnd | BitOr | BitXor => l.width(signals).max(r.width(signals)),
        Shl | Shr => l.width(signals),
        Lt | Le | Gt | Ge | Eq | Ne | LogicAnd | LogicOr => 1,
    }
}

fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

fn scan_body(body: &[SStmt], reads: &mut BTreeSet<SignalId>, writes: &mut Vec<SignalId>) {
    for s in body {
        match s {
            SStmt::Assign { target, value } => {
                scan_expr(value, reads);
                if let STarget::Bit(_, idx) = target {
                    scan_expr(idx, reads);
                }
                writes.push(target.sig());
            }
            SStmt::If { cond, then_s, else_s } => {
                scan_expr(cond, reads);
                scan_body(then_s, reads, writes);
                scan_body(else_s, reads, writes);
            }
            SStmt::Case { expr, arms, default } => {
                scan_expr(expr, reads);
                for (labels, body) in arms {
                    for l in labels {
                        scan_expr(&l.expr, reads);
                    }
                    scan_body(body, reads, writes);
                }
                scan_body(default, reads, writes);
            }
        }
    }
}

fn scan_expr(e: &SExpr, reads: &mut BTreeSet<SignalId>) {
    match e {
        SExpr::Const { .. } => {}
        SExpr::Sig(s) => {
            reads.insert(*s);
        }
        SExpr::Unary { operand, .. } => scan_expr(operand, reads),
        SExpr::Binary { lhs, rhs, .. } => {
            scan_expr(lhs, reads);
            scan_expr(rhs, reads);
        }
        SExpr::BitSel { sig, index } => {
            reads.insert(*sig);
            scan_expr(index, reads);
        }
        SExpr::PartSel { sig, .. } => {
            reads.insert(*sig);
        }
        SExpr::Concat { parts, .. } => {
            for p in parts {
                scan_expr(p, reads);
            }
        }
        SExpr::Ternary { cond, then_e, else_e, .. } => {
            scan_expr(cond, reads);
            scan_expr(then_e, reads);
            scan_expr(else_e, reads);
        }
    }
}

/// Kahn's algorithm over write→read dependencies, whole-signal granularity.
/// A leftover cycle is reported with the signals it runs through.
fn toposort_comb(procs: Vec<Process>, signals: &[SignalInfo]) -> Result<Vec<Process>, SimError> {
    let n = procs.len();
    // writer index per signal (multiple writers of disjoint ranges of one
    // signal are all treated as writers).
    let mut writers: BTreeMap<SignalId, Vec<usize>> = BTreeMap::new();
    for (i, p) in procs.iter().enumerate() {
        for w in &p.writes {
            writers.entry(*w).or_default().push(i);
        }
    }
    let mut deps: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (i, p) in procs.iter().enumerate() {
        for r in &p.reads {
            if let Some(ws) = writers.get(r) {
                for &w in ws {
                    if w != i {
                        deps[i].insert(w);
                    }
                }
            }
        }
    }
    let mut indegree: Vec<usize> = deps.iter().map(|d| d.len()).collect();
    let mut dependents: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, d) in deps.iter().enumerate() {
        for &w in d {
            dependents[w].push(i);
        }
    }
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = queue.pop_front() {
        order.push(i);
        for &j in &dependents[i] {
            indegree[j] -= 1;
            if indegree[j] == 0 {
                queue.push_back(j);
            }
        }
    }
    if order.len() != n {
        let mut cyc_signals: BTreeSet<String> = BTreeSet::new();
        for (i, p) in procs.iter().enumerate() {
            if !order.contains(&i) {
                for w in &p.writes {
                    cyc_signals.insert(signals[*w].name.clone());
                }
            }
        }
        return Err(SimError::CombinationalCycle(cyc_signals.into_iter().collect()));
    }
    let mut slots: Vec<Option<Process>> = procs.into_iter().map(Some).collect();
    Ok(order.into_iter().map(|i| slots[i].take().unwrap()).collect())
}

// ---------------------------------------------------------------------
// Run
// ---------------------------------------------------------------------

struct Evaluator<'a> {
    signals: &'a [SignalInfo],
    state: &'a mut Vec<u64>,
    /// Process-local view for blocking assigns inside edge processes.
    overlay: Option<BTreeMap<SignalId, u64>>,
    /// Deferred writes (edge processes commit after all have evaluated).
    buffer: Option<Vec<(SignalId, u64)>>,
    changed: bool,
}

impl<'a> Evaluator<'a> {
    fn read(&self, sig: SignalId) -> u64 {
        if let Some(overlay) = &self.overlay {
            if let Some(v) = overlay.get(&sig) {
                return *v;
            }
        }
        self.state[sig]
    }

    fn write(&mut self, target: &STarget, value: u64) {
        let sig = target.sig();
        let width = self.signals[sig].width;
        let current = self.read(sig);
        let next = match target {
            STarget::Whole(_) => value & mask(width),
            STarget::Bit(_, idx) => {
                let i = self.eval(idx);
                if i as u32 >= width {
                    current
                } else {
                    (current & !(1 << i)) | ((value & 1) << i)
                }
            }
            STarget::Part(_, msb, lsb) => {
                let w = msb - lsb + 1;
                let m = mask(w) << lsb;
                (current & !m) | ((value & mask(w)) << lsb)
            }
        };
        match (&mut self.buffer, &mut self.overlay) {
            (Some(buffer), overlay) => {
                buffer.push((sig, next));
                if let Some(o) = overlay {
                    o.insert(sig, next);
                }
            }
            (None, _) => {
                if self.state[sig] != next {
                    self.state[sig] = next;
                    self.changed = true;
                }
            }
        }
    }

    fn exec(&mut self, stmts: &[SStmt]) {
        for s in stmts {
            match s {
                SStmt::Assign { target, value } => {
                    let v = self.eval(value);
                    self.write(target, v);
                }
                SStmt::If { cond, then_s, else_s } => {
                    if self.eval(cond) != 0 {
                        self.exec(then_s);
                    } else {
                        self.exec(else_s);
                    }
                }
                SStmt::Case { expr, arms, default } => {
                    let v = self.eval(expr);
                    let mut matched = false;
                    'arms: for (labels, body) in arms {
                        for label in labels {
                            let lv = self.eval(&label.expr);
                            let hit = match label.care {
                                Some(care) => (v & care) == (lv & care),
                                None => v == lv,
                            };
                            if hit {
                                self.exec(body);
                                matched = true;
                                break 'arms;
                            }
                        }
                    }
                    if !matched {
                        self.exec(default);
                    }
                }
            }
        }
    }

    fn eval(&self, e: &SExpr) -> u64 {
        match e {
            SExpr::Const { value, .. } => *value,
            SExpr::Sig(s) => self.read(*s),
            SExpr::Unary { op, operand, width } => {
                let v = self.eval(operand);
                let ow = operand.width(self.signals);
                match op {
                    ast::UnaryOp::LogicNot => (v == 0) as u64,
                    ast::UnaryOp::BitNot => !v & mask(*width),
                    ast::UnaryOp::Neg => v.wrapping_neg() & mask(*width),
                    ast::UnaryOp::RedAnd => (v == mask(ow)) as u64,
                    ast::UnaryOp::RedOr => (v != 0) as u64,
                    ast::UnaryOp::RedXor => (v.count_ones() % 2) as u64,
                }
            }
            SExpr::Binary { op, lhs, rhs, width } => {
                use ast::BinaryOp::*;
                let a = self.eval(lhs);
                let b = self.eval(rhs);
                match op {
                    Add => a.wrapping_add(b) & mask(*width),
                    Sub => a.wrapping_sub(b) & mask(*width),
                    Shl => {
                        if b >= 64 {
                            0
                        } else {
                            (a << b) & mask(*width)
                        }
                    }
                    Shr => {
                        if b >= 64 {
                            0
                        } else {
                            a >> b
                        }
                    }
                    Lt => (a < b) as u64,
                    Le => (a <= b) as u64,
                    Gt => (a > b) as u64,
                    Ge => (a >= b) as u64,
                    Eq => (a == b) as u64,
                    Ne => (a != b) as u64,
                    LogicAnd => ((a != 0) && (b != 0)) as u64,
                    LogicOr => ((a != 0) || (b != 0)) as u64,
                    BitAnd => a & b,
                    BitOr => a | b,
                    BitXor => a ^ b,
                }
            }
            SExpr::BitSel { sig, index } => {
                let i = self.eval(index);
                let w = self.signals[*sig].width;
                if i as u32 >= w {
                    0
                } else {
                    (self.read(*sig) >> i) & 1
                }
            }
            SExpr::PartSel { sig, msb, lsb } => {
                (self.read(*sig) >> lsb) & mask(msb - lsb + 1)
            }
            SExpr::Concat { parts, .. } => {
                let mut acc = 0u64;
                for p in parts {
                    let w = p.width(self.signals);
                    acc = (acc << w) | (self.eval(p) & mask(w));
                }
                acc
            }
            SExpr::Ternary { cond, then_e, else_e, .. } => {
                if self.eval(cond) != 0 {
                    self.eval(then_e)
                } else {
                    self.eval(else_e)
                }
            }
        }
    }
}

/// Runs the design for `cycles` cycles and records the named signals.
///
/// Per cycle: stimulus writes apply, the reset protocol forces the reset
/// signal, combinational logic settles, edge processes evaluate on pre-edge
/// values (during the reset window only reset-guarded processes run),
/// buffered updates commit, combinational logic settles again, and the
/// recorded signals sample. All state starts at 0.
pub fn run(
    design: &ElaboratedDesign,
    stimulus: &Stimulus,
    cycles: u64,
    record: &[String],
) -> Result<Trace, SimError> {
    if cycles == 0 {
        return Err(SimError::ZeroCycles);
    }
    if stimulus.reset_cycles == 0 {
        return Err(SimError::ZeroResetCycles);
    }

    let record_ids: Vec<SignalId> = record
        .iter()
        .map(|name| {
            design
                .signal_id(name)
                .ok_or_else(|| SimError::UnknownRecordSignal(name.clone()))
        })
        .collect::<Result<_, _>>()?;

    // Validate and bucket stimulus writes.
    let mut writes_by_cycle: BTreeMap<u64, Vec<(SignalId, u64)>> = BTreeMap::new();
    for w in &stimulus.writes {
        let id = design
            .signal_id(&w.signal)
            .ok_or_else(|| SimError::StimulusUnknownSignal(w.signal.clone()))?;
        if design.signals[id].kind != SignalKind::Input {
            return Err(SimError::StimulusNotAnInput(w.signal.clone()));
        }
        let width = design.signals[id].width;
        if width < 64 && w.value >= (1u64 << width) {
            return Err(SimError::StimulusValueTooWide {
                signal: w.signal.clone(),
                value: w.value,
                width,
            });
        }
        writes_by_cycle.entry(w.cycle).or_default().push((id, w.value));
    }

    let reset_id = design.signal_id(&stimulus.reset_signal);
    let (reset_on, reset_off) = match stimulus.reset_active {
        ActiveLevel::Low => (0u64, 1u64),
        ActiveLevel::High => (1u64, 0u64),
    };

    let mut state: Vec<u64> = vec![0; design.signals.len()];
    let mut trace = Trace::new(cycles as usize);
    for &id in &record_ids {
        trace.add_signal(&design.signals[id].name, design.signals[id].width);
    }

    for t in 0..cycles {
        if let Some(ws) = writes_by_cycle.get(&t) {
            for (id, v) in ws {
                state[*id] = *v;
            }
        }
        if let Some(rid) = reset_id {
            state[rid] = if t < stimulus.reset_cycles { reset_on } else { reset_off };
        }

        settle(design, &mut state)?;

        // Clock edge. During the reset window the clock is held, but async
        // resets act regardless of the clock: only processes whose reset
        // aliases the forced reset signal evaluate.
        let in_reset = t < stimulus.reset_cycles;
        let mut commit: Vec<(SignalId, u64)> = Vec::new();
        for p in &design.seq {
            if in_reset && (reset_id.is_none() || p.reset_root != reset_id) {
                continue;
            }
            let mut ev = Evaluator {
                signals: &design.signals,
                state: &mut state,
                overlay: Some(BTreeMap::new()),
                buffer: Some(Vec::new()),
                changed: false,
            };
            ev.exec(&p.body);
            commit.extend(ev.buffer.take().unwrap());
        }
        for (sig, v) in commit {
            state[sig] = v;
        }

        settle(design, &mut state)?;

        let row: Vec<u64> = record_ids.iter().map(|&id| state[id]).collect();
        trace.push_row(&row);
    }
    Ok(trace)
}

fn settle(design: &ElaboratedDesign, state: &mut Vec<u64>) -> Result<(), SimError> {
    for _sweep in 0..MAX_SETTLE_SWEEPS {
        let mut changed = false;
        for p in &design.comb {
            let mut ev = Evaluator {
                signals: &design.signals,
                state,
                overlay: None,
                buffer: None,
                changed: false,
            };
            ev.exec(&p.body);
            changed |= ev.changed;
        }
        if !changed {
            return Ok(());
        }
    }
    Err(SimError::Instability)
}

/// All signal names in declaration order; the default record set.
pub fn all_signals(design: &ElaboratedDesign) -> Vec<String> {
    design.signals.iter().map(|s| s.name.clone()).collect()
}
