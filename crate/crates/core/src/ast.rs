//! Typed syntax tree for the supported Verilog subset.
//!
//! Every node carries a span. Spans are excluded from serialization, which is
//! what [`structural_eq`] compares — two trees are structurally equal when
//! they differ only in layout.

use serde::Serialize;

use crate::source::Span;
use crate::token::{Base, Number};

#[derive(Debug, Clone, Default, Serialize)]
pub struct Ast {
    pub modules: Vec<ModuleDecl>,
    /// Top-level items outside any module. Lint fixtures are often bare
    /// fragments (a lone always block or case statement); they are analyzed
    /// as if they formed an anonymous module body.
    pub orphans: Vec<Item>,
}

impl Ast {
    pub fn has_recovery_nodes(&self) -> bool {
        self.modules.iter().any(|m| m.items.iter().any(item_has_error))
            || self.orphans.iter().any(item_has_error)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ModuleDecl {
    pub name: String,
    #[serde(skip)]
    pub name_span: Span,
    pub params: Vec<ParamDecl>,
    pub ports: Vec<PortDecl>,
    pub items: Vec<Item>,
    #[serde(skip)]
    pub span: Span,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamDecl {
    pub name: String,
    pub value: Expr,
    pub local: bool,
    #[serde(skip)]
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PortDir {
    Input,
    Output,
    Inout,
}

impl PortDir {
    pub fn as_str(self) -> &'static str {
        match self {
            PortDir::Input => "input",
            PortDir::Output => "output",
            PortDir::Inout => "inout",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NetKind {
    Wire,
    Reg,
}

#[derive(Debug, Clone, Serialize)]
pub struct PortDecl {
    pub name: String,
    pub dir: PortDir,
    pub net: NetKind,
    /// `[msb:lsb]` range; `None` means a scalar port.
    pub width: Option<RangeSpec>,
    #[serde(skip)]
    pub span: Span,
    #[serde(skip)]
    pub name_span: Span,
}

#[derive(Debug, Clone, Serialize)]
pub struct RangeSpec {
    pub msb: Expr,
    pub lsb: Expr,
    #[serde(skip)]
    pub span: Span,
}

#[derive(Debug, Clone, Serialize)]
pub enum Item {
    Net(NetDecl),
    Param(ParamDecl),
    Assign(AssignItem),
    Always(AlwaysBlock),
    Initial(InitialBlock),
    Instance(Instantiation),
    /// A statement found where an item was expected (recovery context).
    Stmt(Statement),
    /// Placeholder for a region the parser could not shape.
    Error(#[serde(skip)] Span),
}

impl Item {
    pub fn span(&self) -> Span {
        match self {
            Item::Net(n) => n.span,
            Item::Param(p) => p.span,
            Item::Assign(a) => a.span,
            Item::Always(a) => a.span,
            Item::Initial(i) => i.span,
            Item::Instance(i) => i.span,
            Item::Stmt(s) => s.span(),
            Item::Error(s) => *s,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NetDecl {
    pub kind: NetKind,
    pub width: Option<RangeSpec>,
    pub names: Vec<DeclName>,
    #[serde(skip)]
    pub span: Span,
}

#[derive(Debug, Clone, Serialize)]
pub struct DeclName {
    pub name: String,
    #[serde(skip)]
    pub span: Span,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssignItem {
    pub target: LValue,
    pub value: Expr,
    #[serde(skip)]
    pub span: Span,
}

#[derive(Debug, Clone, Serialize)]
pub enum Sensitivity {
    Star,
    Edges(Vec<EdgeEvent>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EdgePolarity {
    Pos,
    Neg,
}

#[derive(Debug, Clone, Serialize)]
pub struct EdgeEvent {
    pub polarity: EdgePolarity,
    pub signal: String,
    #[serde(skip)]
    pub span: Span,
}

#[derive(Debug, Clone, Serialize)]
pub struct AlwaysBlock {
    pub sensitivity: Sensitivity,
    pub body: Vec<Statement>,
    #[serde(skip)]
    pub span: Span,
}

#[derive(Debug, Clone, Serialize)]
pub struct InitialBlock {
    pub body: Vec<Statement>,
    #[serde(skip)]
    pub span: Span,
}

#[derive(Debug, Clone, Serialize)]
pub struct Instantiation {
    pub module: String,
    #[serde(skip)]
    pub module_span: Span,
    pub instance: String,
    #[serde(skip)]
    pub instance_span: Span,
    pub conns: Connections,
    #[serde(skip)]
    pub span: Span,
}

#[derive(Debug, Clone, Serialize)]
pub enum Connections {
    Positional(Vec<Expr>),
    Named(Vec<NamedConn>),
}

#[derive(Debug, Clone, Serialize)]
pub struct NamedConn {
    pub port: String,
    #[serde(skip)]
    pub port_span: Span,
    /// `.p()` leaves the port deliberately unconnected.
    pub expr: Option<Expr>,
    #[serde(skip)]
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CaseKind {
    Case,
    Casez,
}

#[derive(Debug, Clone, Serialize)]
pub enum Statement {
    Blocking {
        target: LValue,
        value: Expr,
        #[serde(skip)]
        span: Span,
    },
    Nonblocking {
        target: LValue,
        value: Expr,
        #[serde(skip)]
        span: Span,
    },
    If {
        cond: Expr,
        then_branch: Vec<Statement>,
        else_branch: Option<Vec<Statement>>,
        #[serde(skip)]
        span: Span,
    },
    Case {
        kind: CaseKind,
        expr: Expr,
        arms: Vec<CaseArm>,
        default: Option<Vec<Statement>>,
        #[serde(skip)]
        span: Span,
    },
    Block {
        stmts: Vec<Statement>,
        #[serde(skip)]
        span: Span,
    },
    /// `#N;` or `#N stmt` — kept so lint can flag it.
    Delay {
        amount: u64,
        stmt: Option<Box<Statement>>,
        #[serde(skip)]
        span: Span,
    },
    Error(#[serde(skip)] Span),
}

impl Statement {
    pub fn span(&self) -> Span {
        match self {
            Statement::Blocking { span, .. }
            | Statement::Nonblocking { span, .. }
            | Statement::If { span, .. }
            | Statement::Case { span, .. }
            | Statement::Block { span, .. }
            | Statement::Delay { span, .. } => *span,
            Statement::Error(span) => *span,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseArm {
    pub labels: Vec<Expr>,
    pub body: Vec<Statement>,
    #[serde(skip)]
    pub span: Span,
}

#[derive(Debug, Clone, Serialize)]
pub enum LValue {
    Ident {
        name: String,
        #[serde(skip)]
        span: Span,
    },
    BitSelect {
        base: String,
        #[serde(skip)]
        base_span: Span,
        index: Box<Expr>,
        #[serde(skip)]
        span: Span,
    },
    PartSelect {
        base: String,
        #[serde(skip)]
        base_span: Span,
        msb: Box<Expr>,
        lsb: Box<Expr>,
        #[serde(skip)]
        span: Span,
    },
}

impl LValue {
    pub fn base_name(&self) -> &str {
        match self {
            LValue::Ident { name, .. }
            | LValue::BitSelect { base: name, .. }
            | LValue::PartSelect { base: name, .. } => name,
        }
    }

    pub fn span(&self) -> Span {
        match self {
            LValue::Ident { span, .. }
            | LValue::BitSelect { span, .. }
            | LValue::PartSelect { span, .. } => *span,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum UnaryOp {
    LogicNot,
    BitNot,
    Neg,
    RedAnd,
    RedOr,
    RedXor,
}

impl UnaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            UnaryOp::LogicNot => "!",
            UnaryOp::BitNot => "~",
            UnaryOp::Neg => "-",
            UnaryOp::RedAnd => "&",
            UnaryOp::RedOr => "|",
            UnaryOp::RedXor => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BinaryOp {
    Add,
    Sub,
    Shl,
    Shr,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    LogicAnd,
    LogicOr,
    BitAnd,
    BitOr,
    BitXor,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Shl => "<<",
            BinaryOp::Shr => ">>",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::LogicAnd => "&&",
            BinaryOp::LogicOr => "||",
            BinaryOp::BitAnd => "&",
            BinaryOp::BitOr => "|",
            BinaryOp::BitXor => "^",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::LogicOr => 1,
            BinaryOp::LogicAnd => 2,
            BinaryOp::BitOr => 3,
            BinaryOp::BitXor => 4,
            BinaryOp::BitAnd => 5,
            BinaryOp::Eq | BinaryOp::Ne => 6,
            BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => 7,
            BinaryOp::Shl | BinaryOp::Shr => 8,
            BinaryOp::Add | BinaryOp::Sub => 9,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub enum Expr {
    Ident {
        name: String,
        #[serde(skip)]
        span: Span,
    },
    Literal {
        number: Number,
        #[serde(skip)]
        span: Span,
    },
    Unary {
        op: UnaryOp,
        operand: Box<Expr>,
        #[serde(skip)]
        span: Span,
    },
    Binary {
        op: BinaryOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
        #[serde(skip)]
        span: Span,
    },
    BitSelect {
        base: String,
        #[serde(skip)]
        base_span: Span,
        index: Box<Expr>,
        #[serde(skip)]
        span: Span,
    },
    PartSelect {
        base: String,
        #[serde(skip)]
        base_span: Span,
        msb: Box<Expr>,
        lsb: Box<Expr>,
        #[serde(skip)]
        span: Span,
    },
    Concat {
        parts: Vec<Expr>,
        #[serde(skip)]
        span: Span,
    },
    Repeat {
        count: Box<Expr>,
        inner: Vec<Expr>,
        #[serde(skip)]
        span: Span,
    },
    Ternary {
        cond: Box<Expr>,
        then_expr: Box<Expr>,
        else_expr: Box<Expr>,
        #[serde(skip)]
        span: Span,
    },
    Error(#[serde(skip)] Span),
}

impl Expr {
    pub fn span(&self) -> Span {
        match self {
            Expr::Ident { span, .. }
            | Expr::Literal { span, .. }
            | Expr::Unary { span, .. }
            | Expr::Binary { span, .. }
            | Expr::BitSelect { span, .. }
            | Expr::PartSelect { span, .. }
            | Expr::Concat { span, .. }
            | Expr::Repeat { span, .. }
            | Expr::Ternary { span, .. } => *span,
            Expr::Error(span) => *span,
        }
    }

    pub fn number(value: u64, width: Option<u32>, span: Span) -> Expr {
        Expr::Literal {
            number: Number {
                width,
                base: Base::Dec,
                digits: value.to_string(),
                value,
                has_xz: false,
            },
            span,
        }
    }

    /// Constant-folds the expression in `params` scope; `None` when the
    /// expression is not a compile-time constant.
    pub fn const_eval(&self, params: &dyn Fn(&str) -> Option<u64>) -> Option<u64> {
        match self {
            Expr::Literal { number, .. } => Some(number.value),
            Expr::Ident { name, .. } => params(name),
            Expr::Unary { op, operand, .. } => {
                let v = operand.const_eval(params)?;
                Some(match op {
                    UnaryOp::LogicNot => (v == 0) as u64,
                    UnaryOp::BitNot => !v,
                    UnaryOp::Neg => v.wrapping_neg(),
                    UnaryOp::RedAnd => (v == u64::MAX) as u64,
                    UnaryOp::RedOr => (v != 0) as u64,
                    UnaryOp::RedXor => (v.count_ones() % 2) as u64,
                })
            }
            Expr::Binary { op, lhs, rhs, .. } => {
                let a = lhs.const_eval(params)?;
                let b = rhs.const_eval(params)?;
                Some(match op {
                    BinaryOp::Add => a.wrapping_add(b),
                    BinaryOp::Sub => a.wrapping_sub(b),
                    BinaryOp::Shl => a.checked_shl(b as u32).unwrap_or(0),
                    BinaryOp::Shr => a.checked_shr(b as u32).unwrap_or(0),
                    BinaryOp::Lt => (a < b) as u64,
                    BinaryOp::Le => (a <= b) as u64,
                    BinaryOp::Gt => (a > b) as u64,
                    BinaryOp::Ge => (a >= b) as u64,
                    BinaryOp::Eq => (a == b) as u64,
                    BinaryOp::Ne => (a != b) as u64,
                    BinaryOp::LogicAnd => ((a != 0) && (b != 0)) as u64,
                    BinaryOp::LogicOr => ((a != 0) || (b != 0)) as u64,
                    BinaryOp::BitAnd => a & b,
                    BinaryOp::BitOr => a | b,
                    BinaryOp::BitXor => a ^ b,
                })
            }
            Expr::Ternary { cond, then_expr, else_expr, .. } => {
                let c = cond.const_eval(params)?;
                if c != 0 {
                    then_expr.const_eval(params)
                } else {
                    else_expr.const_eval(params)
                }
            }
            _ => None,
        }
    }
}

impl ModuleDecl {
    /// Evaluator over this module's parameter/localparam declarations.
    pub fn param_env(&self) -> impl Fn(&str) -> Option<u64> + '_ {
        move |name: &str| self.resolve_param(name, 0)
    }

    /// Parameters may reference earlier parameters; the depth cap breaks
    /// definition cycles.
    fn resolve_param(&self, name: &str, depth: usize) -> Option<u64> {
        if depth > 16 {
            return None;
        }
        let p = self
            .params
            .iter()
            .chain(self.items.iter().filter_map(|i| match i {
                Item::Param(p) => Some(p),
                _ => None,
            }))
            .find(|p| p.name == name)?;
        p.value.const_eval(&|inner| self.resolve_param(inner, depth + 1))
    }

    /// Bit width of a declared range in this module's parameter scope:
    /// `msb - lsb + 1`. `None` when the bounds are not constant.
    pub fn range_width(&self, range: &Option<RangeSpec>) -> Option<u32> {
        match range {
            None => Some(1),
            Some(r) => {
                let env = self.param_env();
                let msb = r.msb.const_eval(&env)?;
                let lsb = r.lsb.const_eval(&env)?;
                Some((msb.max(lsb) - msb.min(lsb) + 1) as u32)
            }
        }
    }

    pub fn port(&self, name: &str) -> Option<&PortDecl> {
        self.ports.iter().find(|p| p.name == name)
    }
}

fn item_has_error(item: &Item) -> bool {
    match item {
        Item::Error(_) => true,
        Item::Always(a) => a.body.iter().any(stmt_has_error),
        Item::Initial(i) => i.body.iter().any(stmt_has_error),
        Item::Stmt(s) => stmt_has_error(s),
        Item::Assign(a) => expr_has_error(&a.value),
        Item::Instance(inst) => match &inst.conns {
            Connections::Positional(es) => es.iter().any(expr_has_error),
            Connections::Named(ns) => {
                ns.iter().any(|n| n.expr.as_ref().is_some_and(expr_has_error))
            }
        },
        Item::Net(_) | Item::Param(_) => false,
    }
}

fn stmt_has_error(s: &Statement) -> bool {
    match s {
        Statement::Error(_) => true,
        Statement::Blocking { value, .. } | Statement::Nonblocking { value, .. } => {
            expr_has_error(value)
        }
        Statement::If { cond, then_branch, else_branch, .. } => {
            expr_has_error(cond)
                || then_branch.iter().any(stmt_has_error)
                || else_branch.as_ref().is_some_and(|e| e.iter().any(stmt_has_error))
        }
        Statement::Case { expr, arms, default, .. } => {
            expr_has_error(expr)
                || arms.iter().any(|a| {
                    a.labels.iter().any(expr_has_error) || a.body.iter().any(stmt_has_error)
                })
                || default.as_ref().is_some_and(|d| d.iter().any(stmt_has_error))
        }
        Statement::Block { stmts, .. } => stmts.iter().any(stmt_has_error),
        Statement::Delay { stmt, .. } => stmt.as_deref().is_some_and(stmt_has_error),
    }
}

fn expr_has_error(e: &Expr) -> bool {
    match e {
        Expr::Error(_) => true,
        Expr::Ident { .. } | Expr::Literal { .. } => false,
        Expr::Unary { operand, .. } => expr_has_error(operand),
        Expr::Binary { lhs, rhs, .. } => expr_has_error(lhs) || expr_has_error(rhs),
        Expr::BitSelect { index, .. } => expr_has_error(index),
        Expr::PartSelect { msb, lsb, .. } => expr_has_error(msb) || expr_has_error(lsb),
        Expr::Concat { parts, .. } => parts.iter().any(expr_has_error),
        Expr::Repeat { count, inner, .. } => {
            expr_has_error(count) || inner.iter().any(expr_has_error)
        }
        Expr::Ternary { cond, then_expr, else_expr, .. } => {
            expr_has_error(cond) || expr_has_error(then_expr) || expr_has_error(else_expr)
        }
    }
}

/// Structural comparison, layout and spans excluded.
pub fn structural_eq(a: &Ast, b: &Ast) -> bool {
    serde_json::to_value(a).expect("ast json") == serde_json::to_value(b).expect("ast json")
}
