//! Normalized source emission. The printed text reparses to a structurally
//! identical tree, which is what the round-trip property checks.

use std::fmt::Write;

use thiserror::Error;

use crate::ast::*;

#[derive(Debug, Error, PartialEq)]
pub enum PrettyError {
    #[error("cannot print recovered tree")]
    RecoveredTree,
}

pub fn pretty_print(ast: &Ast) -> Result<String, PrettyError> {
    if ast.has_recovery_nodes() {
        return Err(PrettyError::RecoveredTree);
    }
    let mut out = String::new();
    for (i, m) in ast.modules.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        print_module(&mut out, m);
    }
    for item in &ast.orphans {
        print_item(&mut out, item, 0);
    }
    Ok(out)
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn print_module(out: &mut String, m: &ModuleDecl) {
    write!(out, "module {}", m.name).unwrap();
    if !m.params.is_empty() {
        out.push_str(" #(\n");
        for (i, p) in m.params.iter().enumerate() {
            indent(out, 1);
            write!(out, "parameter {} = {}", p.name, expr_str(&p.value)).unwrap();
            out.push_str(if i + 1 < m.params.len() { ",\n" } else { "\n" });
        }
        out.push(')');
    }
    if m.ports.is_empty() {
        out.push_str(";\n");
    } else {
        out.push_str(" (\n");
        for (i, p) in m.ports.iter().enumerate() {
            indent(out, 1);
            let net = match p.net {
                NetKind::Wire => "wire",
                NetKind::Reg => "reg",
            };
            write!(out, "{} {}", p.dir.as_str(), net).unwrap();
            if let Some(r) = &p.width {
                write!(out, " [{}:{}]", expr_str(&r.msb), expr_str(&r.lsb)).unwrap();
            }
            write!(out, " {}", p.name).unwrap();
            out.push_str(if i + 1 < m.ports.len() { ",\n" } else { "\n" });
        }
        out.push_str(");\n");
    }
    for item in &m.items {
        print_item(out, item, 1);
    }
    out.push_str("endmodule\n");
}

fn print_item(out: &mut String, item: &Item, level: usize) {
    match item {
        Item::Net(n) => {
            indent(out, level);
            let kw = match n.kind {
                NetKind::Wire => "wire",
                NetKind::Reg => "reg",
            };
            out.push_str(kw);
            if let Some(r) = &n.width {
                write!(out, " [{}:{}]", expr_str(&r.msb), expr_str(&r.lsb)).unwrap();
            }
            let names: Vec<&str> = n.names.iter().map(|d| d.name.as_str()).collect();
            writeln!(out, " {};", names.join(", ")).unwrap();
        }
        Item::Param(p) => {
            indent(out, level);
            let kw = if p.local { "localparam" } else { "parameter" };
            writeln!(out, "{kw} {} = {};", p.name, expr_str(&p.value)).unwrap();
        }
        Item::Assign(a) => {
            indent(out, level);
            writeln!(out, "assign {} = {};", lvalue_str(&a.target), expr_str(&a.value)).unwrap();
        }
        Item::Always(a) => {
            indent(out, level);
            let sens = match &a.sensitivity {
                Sensitivity::Star => "*".to_string(),
                Sensitivity::Edges(edges) => edges
                    .iter()
                    .map(|e| {
                        let kw = match e.polarity {
                            EdgePolarity::Pos => "posedge",
                            EdgePolarity::Neg => "negedge",
                        };
                        format!("{kw} {}", e.signal)
                    })
                    .collect::<Vec<_>>()
                    .join(" or "),
            };
            writeln!(out, "always @({sens}) begin").unwrap();
            for s in &a.body {
                print_stmt(out, s, level + 1);
            }
            indent(out, level);
            out.push_str("end\n");
        }
        Item::Initial(i) => {
            indent(out, level);
            out.push_str("initial begin\n");
            for s in &i.body {
                print_stmt(out, s, level + 1);
            }
            indent(out, level);
            out.push_str("end\n");
        }
        Item::Instance(inst) => {
            indent(out, level);
            write!(out, "{} {} (", inst.module, inst.instance).unwrap();
            match &inst.conns {
                Connections::Positional(es) => {
                    let parts: Vec<String> = es.iter().map(expr_str).collect();
                    write!(out, "{}", parts.join(", ")).unwrap();
                    out.push_str(");\n");
                }
                Connections::Named(ns) => {
                    out.push('\n');
                    for (i, n) in ns.iter().enumerate() {
                        indent(out, level + 1);
                        match &n.expr {
                            Some(e) => write!(out, ".{}({})", n.port, expr_str(e)).unwrap(),
                            None => write!(out, ".{}()", n.port).unwrap(),
                        }
                        out.push_str(if i + 1 < ns.len() { ",\n" } else { "\n" });
                    }
                    indent(out, level);
                    out.push_str(");\n");
                }
            }
        }
        Item::Stmt(s) => print_stmt(out, s, level),
        Item::Error(_) => unreachable!("recovery nodes rejected before printing"),
    }
}

fn print_stmt(out: &mut String, s: &Statement, level: usize) {
    match s {
        Statement::Blocking { target, value, .. } => {
            indent(out, level);
            writeln!(out, "{} = {};", lvalue_str(target), expr_str(value)).unwrap();
        }
        Statement::Nonblocking { target, value, .. } => {
            indent(out, level);
            writeln!(out, "{} <= {};", lvalue_str(target), expr_str(value)).unwrap();
        }
        Statement::If { cond, then_branch, else_branch, .. } => {
            indent(out, level);
            writeln!(out, "if ({}) begin", expr_str(cond)).unwrap();
            for s in then_branch {
                print_stmt(out, s, level + 1);
            }
            indent(out, level);
            match else_branch {
                Some(e) => {
                    out.push_str("end else begin\n");
                    for s in e {
                        print_stmt(out, s, level + 1);
                    }
                    indent(out, level);
                    out.push_str("end\n");
                }
                None => out.push_str("end\n"),
            }
        }
        Statement::Case { kind, expr, arms, default, .. } => {
            indent(out, level);
            let kw = match kind {
                CaseKind::Case => "case",
                CaseKind::Casez => "casez",
            };
            writeln!(out, "{kw} ({})", expr_str(expr)).unwrap();
            for arm in arms {
                indent(out, level + 1);
                let labels: Vec<String> = arm.labels.iter().map(expr_str).collect();
                writeln!(out, "{}: begin", labels.join(", ")).unwrap();
                for s in &arm.body {
                    print_stmt(out, s, level + 2);
                }
                indent(out, level + 1);
                out.push_str("end\n");
            }
            if let Some(d) = default {
                indent(out, level + 1);
                out.push_str("default: begin\n");
                for s in d {
                    print_stmt(out, s, level + 2);
                }
                indent(out, level + 1);
                out.push_str("end\n");
            }
            indent(out, level);
            out.push_str("endcase\n");
        }
        Statement::Block { stmts, .. } => {
            indent(out, level);
            out.push_str("begin\n");
            for s in stmts {
                print_stmt(out, s, level + 1);
            }
            indent(out, level);
            out.push_str("end\n");
        }
        Statement::Delay { amount, stmt, .. } => {
            indent(out, level);
            match stmt {
                Some(inner) => {
                    writeln!(out, "#{amount}").unwrap();
                    print_stmt(out, inner, level);
                }
                None => writeln!(out, "#{amount};").unwrap(),
            }
        }
        Statement::Error(_) => unreachable!("recovery nodes rejected before printing"),
    }
}

fn lvalue_str(lv: &LValue) -> String {
    match lv {
        LValue::Ident { name, .. } => name.clone(),
        LValue::BitSelect { base, index, .. } => format!("{base}[{}]", expr_str(index)),
        LValue::PartSelect { base, msb, lsb, .. } => {
            format!("{base}[{}:{}]", expr_str(msb), expr_str(lsb))
        }
    }
}

pub fn expr_str(e: &Expr) -> String {
    expr_prec(e, 0)
}

/// Prints with the minimum parentheses that preserve structure under the
/// parser's precedence table.
fn expr_prec(e: &Expr, parent_prec: u8) -> String {
    match e {
        Expr::Ident { name, .. } => name.clone(),
        Expr::Literal { number, .. } => match number.width {
            Some(w) => format!("{w}'{}{}", number.base.letter(), number.digits),
            None => number.digits.clone(),
        },
        Expr::Unary { op, operand, .. } => {
            let inner = expr_prec(operand, 10);
            // Adjacent unary symbols can fuse into a different token
            // (&& || ~& ~| ~^); a paren keeps them apart.
            let fuses = matches!(
                (op.symbol(), inner.as_bytes().first()),
                ("&", Some(b'&')) | ("|", Some(b'|')) | ("~", Some(b'&' | b'|' | b'^'))
            );
            if fuses {
                format!("{}({inner})", op.symbol())
            } else {
                format!("{}{inner}", op.symbol())
            }
        }
        Expr::Binary { op, lhs, rhs, .. } => {
            let prec = op.precedence();
            let s = format!(
                "{} {} {}",
                expr_prec(lhs, prec),
                op.symbol(),
                expr_prec(rhs, prec + 1)
            );
            if prec < parent_prec {
                format!("({s})")
            } else {
                s
            }
        }
        Expr::BitSelect { base, index, .. } => format!("{base}[{}]", expr_str(index)),
        Expr::PartSelect { base, msb, lsb, .. } => {
            format!("{base}[{}:{}]", expr_str(msb), expr_str(lsb))
        }
        Expr::Concat { parts, .. } => {
            let inner: Vec<String> = parts.iter().map(expr_str).collect();
            format!("{{{}}}", inner.join(", "))
        }
        Expr::Repeat { count, inner, .. } => {
            let parts: Vec<String> = inner.iter().map(expr_str).collect();
            format!("{{{}{{{}}}}}", expr_prec(count, 10), parts.join(", "))
        }
        Expr::Ternary { cond, then_expr, else_expr, .. } => {
            let s = format!(
                "{} ? {} : {}",
                expr_prec(cond, 1),
                expr_prec(then_expr, 1),
                expr_prec(else_expr, 0)
            );
            if parent_prec > 0 {
                format!("({s})")
            } else {
                s
            }
        }
        Expr::Error(_) => unreachable!("recovery nodes rejected before printing"),
    }
}
