//! Pretty printer producing loop-language source that reparses to the same
//! tree.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::ast::*;
use crate::directive::{Directive, SafetyMode};

#[derive(Debug, Clone)]
pub struct EmitOptions {
    /// Emit `// from: <directive>` before generated loops.
    pub annotate: bool,
    pub indent: usize,
    /// Generated loop variable -> description of the directive that made it.
    pub origins: BTreeMap<String, String>,
}

impl Default for EmitOptions {
    fn default() -> Self {
        EmitOptions {
            annotate: false,
            indent: 2,
            origins: BTreeMap::new(),
        }
    }
}

pub fn emit_program(p: &Program, opts: &EmitOptions) -> String {
    let mut e = Emitter {
        out: String::new(),
        opts,
        next_id: 0,
        loops: Vec::new(),
    };
    for d in &p.decls {
        e.decl(d);
    }
    if !p.decls.is_empty() && !p.body.is_empty() {
        e.out.push('\n');
    }
    for s in &p.body {
        e.stmt(s, 0);
    }
    e.out
}

pub fn emit_directive(d: &Directive) -> String {
    let mut s = String::from("#pragma xform");
    if !d.targets.is_empty() {
        let _ = write!(s, " loop({})", d.targets.join(","));
    }
    let _ = write!(s, " {}", d.kind.keyword());
    for c in &d.clauses {
        s.push(' ');
        s.push_str(&c.name);
        if let Some(args) = &c.args {
            let items: Vec<String> = args.iter().map(|a| a.to_string()).collect();
            let _ = write!(s, "({})", items.join(","));
        }
    }
    match d.mode {
        Some(SafetyMode::Fallback) => s.push_str(" fallback"),
        Some(SafetyMode::Force) => s.push_str(" force"),
        Some(SafetyMode::Default) | None => {}
    }
    if d.required {
        s.push_str(" required");
    }
    s
}

struct Emitter<'a> {
    out: String,
    opts: &'a EmitOptions,
    next_id: usize,
    loops: Vec<String>,
}

impl Emitter<'_> {
    fn pad(&mut self, depth: usize) {
        for _ in 0..depth * self.opts.indent {
            self.out.push(' ');
        }
    }

    fn decl(&mut self, d: &Decl) {
        match d {
            Decl::Array(a) => {
                let dims: Vec<String> = a.dims.iter().map(|d| d.to_string()).collect();
                let _ = write!(self.out, "array {}[{}]", a.name, dims.join(", "));
                if a.init == Init::Random {
                    self.out.push_str(" init random");
                }
                self.out.push_str(";\n");
            }
            Decl::MaybeAlias(a, b) => {
                let _ = writeln!(self.out, "maybe_alias({a}, {b});");
            }
            Decl::Param(p) => {
                let _ = write!(self.out, "param {} = {}", p.name, p.value);
                if p.opaque {
                    self.out.push_str(" opaque");
                }
                self.out.push_str(";\n");
            }
        }
    }

    fn block(&mut self, body: &[Stmt], depth: usize) {
        self.out.push_str("{\n");
        for s in body {
            self.stmt(s, depth + 1);
        }
        self.pad(depth);
        self.out.push('}');
    }

    fn pragmas(&mut self, stack: &[Directive], depth: usize) {
        for d in stack.iter().rev() {
            self.pad(depth);
            self.out.push_str(&emit_directive(d));
            self.out.push('\n');
        }
    }

    fn stmt(&mut self, s: &Stmt, depth: usize) {
        match s {
            Stmt::For(f) => {
                if self.opts.annotate {
                    if let Some(origin) = self.opts.origins.get(&f.var) {
                        self.pad(depth);
                        let _ = writeln!(self.out, "// from: {origin}");
                    }
                }
                self.pragmas(&f.pragmas, depth);
                self.pad(depth);
                if f.parallel {
                    self.out.push_str("parallel ");
                }
                let _ = write!(
                    self.out,
                    "for ({v} = {lb}; {v} < {ub}; {v} += {s}) ",
                    v = f.var,
                    lb = expr(&f.lower),
                    ub = expr(&f.upper),
                    s = f.step
                );
                self.loops.push(f.var.clone());
                self.block(&f.body, depth);
                self.loops.pop();
                self.out.push('\n');
            }
            Stmt::While(w) => {
                self.pragmas(&w.pragmas, depth);
                self.pad(depth);
                let _ = write!(self.out, "while ({}) ", expr(&w.cond));
                self.block(&w.body, depth);
                self.out.push('\n');
            }
            Stmt::If(i) => {
                self.pad(depth);
                let _ = write!(self.out, "if ({}) ", expr(&i.cond));
                self.block(&i.then_body, depth);
                if let Some(e) = &i.else_body {
                    self.out.push_str(" else ");
                    self.block(e, depth);
                }
                self.out.push('\n');
            }
            Stmt::Block(b) => {
                self.pad(depth);
                self.block(b, depth);
                self.out.push('\n');
            }
            Stmt::Assign(a) => {
                self.pad(depth);
                let default_iter = a.iter.len() == self.loops.len()
                    && a.iter.iter().zip(&self.loops).all(|(e, v)| matches!(e, Expr::Var(n) if n == v));
                if a.id.0 != self.next_id || !default_iter {
                    let iter: Vec<String> = a.iter.iter().map(expr).collect();
                    let _ = write!(self.out, "@{}({}) ", a.id, iter.join(", "));
                }
                self.next_id += 1;
                let op = match a.op {
                    AssignOp::Set => "=",
                    AssignOp::Add => "+=",
                };
                let _ = writeln!(self.out, "{} {op} {};", array_ref(&a.target), expr(&a.value));
            }
        }
    }
}

fn array_ref(r: &ArrayRef) -> String {
    let mut s = r.array.clone();
    for i in &r.indices {
        let _ = write!(s, "[{}]", expr(i));
    }
    s
}

pub fn expr(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e, 0);
    s
}

fn write_expr(out: &mut String, e: &Expr, min_prec: u8) {
    match e {
        Expr::Int(v) => {
            let _ = write!(out, "{v}");
        }
        Expr::Var(v) => out.push_str(v),
        Expr::Read(r) => out.push_str(&array_ref(r)),
        Expr::Disjoint(a, b) => {
            let _ = write!(out, "disjoint({a}, {b})");
        }
        Expr::Call(f, a, b) => {
            out.push_str(match f {
                Builtin::Min => "min(",
                Builtin::Max => "max(",
            });
            write_expr(out, a, 0);
            out.push_str(", ");
            write_expr(out, b, 0);
            out.push(')');
        }
        Expr::Unary(op, x) => {
            out.push(match op {
                UnOp::Neg => '-',
                UnOp::Not => '!',
            });
            let needs_parens = matches!(**x, Expr::Binary(..)) || (*op == UnOp::Neg && matches!(**x, Expr::Int(_)));
            if needs_parens {
                out.push('(');
                write_expr(out, x, 0);
                out.push(')');
            } else {
                write_expr(out, x, 7);
            }
        }
        Expr::Binary(op, a, b) => {
            let p = op.precedence();
            let parens = p < min_prec;
            if parens {
                out.push('(');
            }
            write_expr(out, a, p);
            let _ = write!(out, " {} ", op.symbol());
            write_expr(out, b, p + 1);
            if parens {
                out.push(')');
            }
        }
    }
}
