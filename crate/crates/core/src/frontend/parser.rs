use std::collections::HashMap;

use super::lexer::{tokenize, Tok, Token};
use super::ParseError;
use crate::ast::*;
use crate::directive::{validate_clauses, Clause, ClauseItem, Directive, SafetyMode, TransformKind};

const RESERVED: &[&str] = &[
    "array", "maybe_alias", "param", "init", "for", "while", "if", "else", "parallel", "min", "max",
    "disjoint", "opaque",
];

pub struct Parser {
    toks: Vec<Token>,
    pos: usize,
    arrays: HashMap<String, usize>,
    params: Vec<String>,
    scope: Vec<String>,
    next_id: usize,
}

impl Parser {
    pub fn new(text: &str) -> Result<Parser, ParseError> {
        Ok(Parser {
            toks: tokenize(text, true)?,
            pos: 0,
            arrays: HashMap::new(),
            params: Vec::new(),
            scope: Vec::new(),
            next_id: 0,
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, off: usize) -> Option<&Tok> {
        self.toks.get(self.pos + off).map(|t| &t.tok)
    }

    fn here(&self) -> (usize, usize) {
        match self.toks.get(self.pos).or(self.toks.last()) {
            Some(t) if self.pos < self.toks.len() => (t.line, t.col),
            Some(t) => (t.line, t.col + 1),
            None => (1, 1),
        }
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        let (line, col) = self.here();
        Err(ParseError {
            line,
            col,
            message: message.into(),
        })
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Some(Tok::Punct(q)) if *q == p)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == w)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), ParseError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            self.err(format!("expected '{p}'"))
        }
    }

    fn expect_word(&mut self, w: &str) -> Result<(), ParseError> {
        if self.is_word(w) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected '{w}'"))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) if !RESERVED.contains(&s.as_str()) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.err("expected identifier"),
        }
    }

    fn int(&mut self) -> Result<i64, ParseError> {
        match self.peek() {
            Some(Tok::Int(v)) => {
                let v = *v;
                self.pos += 1;
                Ok(v)
            }
            _ => self.err("expected integer literal"),
        }
    }

    pub fn program(mut self) -> Result<Program, ParseError> {
        let mut decls = Vec::new();
        loop {
            if self.is_word("array") {
                decls.push(self.array_decl()?);
            } else if self.is_word("maybe_alias") {
                decls.push(self.alias_decl()?);
            } else if self.is_word("param") {
                decls.push(self.param_decl()?);
            } else {
                break;
            }
        }
        let mut body = Vec::new();
        while self.peek().is_some() {
            body.push(self.stmt()?);
        }
        Ok(Program { decls, body })
    }

    fn declare(&mut self, name: &str) -> Result<(), ParseError> {
        if self.arrays.contains_key(name) || self.params.iter().any(|p| p == name) {
            return self.err(format!("'{name}' declared twice"));
        }
        Ok(())
    }

    fn array_decl(&mut self) -> Result<Decl, ParseError> {
        self.expect_word("array")?;
        let name = self.ident()?;
        self.declare(&name)?;
        let mut dims = Vec::new();
        self.expect_punct("[")?;
        loop {
            let d = self.int()?;
            if d < 1 {
                return self.err("array dimensions must be positive");
            }
            dims.push(d as usize);
            if self.eat_punct(",") {
                continue;
            }
            self.expect_punct("]")?;
            if self.eat_punct("[") {
                continue;
            }
            break;
        }
        let init = if self.is_word("init") {
            self.pos += 1;
            if self.is_word("zero") {
                self.pos += 1;
                Init::Zero
            } else if self.is_word("random") {
                self.pos += 1;
                Init::Random
            } else {
                return self.err("expected 'zero' or 'random'");
            }
        } else {
            Init::Zero
        };
        self.expect_punct(";")?;
        self.arrays.insert(name.clone(), dims.len());
        Ok(Decl::Array(ArrayDecl { name, dims, init }))
    }

    fn alias_decl(&mut self) -> Result<Decl, ParseError> {
        self.expect_word("maybe_alias")?;
        self.expect_punct("(")?;
        let a = self.ident()?;
        self.expect_punct(",")?;
        let b = self.ident()?;
        self.expect_punct(")")?;
        self.expect_punct(";")?;
        for n in [&a, &b] {
            if !self.arrays.contains_key(n) {
                return self.err(format!("maybe_alias refers to undeclared array '{n}'"));
            }
        }
        if a == b {
            return self.err("maybe_alias needs two distinct arrays");
        }
        Ok(Decl::MaybeAlias(a, b))
    }

    fn param_decl(&mut self) -> Result<Decl, ParseError> {
        self.expect_word("param")?;
        let name = self.ident()?;
        self.declare(&name)?;
        self.expect_punct("=")?;
        let neg = self.eat_punct("-");
        let v = self.int()?;
        let value = if neg { -v } else { v };
        let opaque = if self.is_word("opaque") {
            self.pos += 1;
            true
        } else {
            false
        };
        self.expect_punct(";")?;
        self.params.push(name.clone());
        Ok(Decl::Param(ParamDecl { name, value, opaque }))
    }

    fn pragmas(&mut self) -> Result<Vec<Directive>, ParseError> {
        let mut stack = Vec::new();
        while let Some(Tok::Pragma(text)) = self.peek() {
            let text = text.clone();
            let (line, col) = self.here();
            stack.push(parse_directive_at(&text, line, col)?);
            self.pos += 1;
        }
        stack.reverse();
        Ok(stack)
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let pragmas = self.pragmas()?;
        if !pragmas.is_empty() && !(self.is_word("for") || self.is_word("parallel") || self.is_word("while")) {
            return self.err("directive must be followed by a loop");
        }
        if self.is_word("for") || self.is_word("parallel") {
            return self.for_loop(pragmas);
        }
        if self.is_word("while") {
            self.pos += 1;
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            let body = self.body()?;
            return Ok(Stmt::While(WhileLoop { cond, pragmas, body }));
        }
        if self.is_word("if") {
            self.pos += 1;
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            let then_body = self.body()?;
            let else_body = if self.is_word("else") {
                self.pos += 1;
                Some(self.body()?)
            } else {
                None
            };
            return Ok(Stmt::If(IfStmt {
                cond,
                then_body,
                else_body,
            }));
        }
        if self.eat_punct("{") {
            let mut stmts = Vec::new();
            while !self.eat_punct("}") {
                if self.peek().is_none() {
                    return self.err("unterminated block");
                }
                stmts.push(self.stmt()?);
            }
            return Ok(Stmt::Block(stmts));
        }
        self.assign()
    }

    /// A loop or branch body: `{ ... }` flattens into the list, anything
    /// else is a single statement.
    fn body(&mut self) -> Result<Vec<Stmt>, ParseError> {
        if self.is_punct("{") {
            match self.stmt()? {
                Stmt::Block(b) => Ok(b),
                _ => unreachable!(),
            }
        } else {
            Ok(vec![self.stmt()?])
        }
    }

    fn for_loop(&mut self, pragmas: Vec<Directive>) -> Result<Stmt, ParseError> {
        let parallel = if self.is_word("parallel") {
            self.pos += 1;
            true
        } else {
            false
        };
        self.expect_word("for")?;
        self.expect_punct("(")?;
        let var = self.ident()?;
        if self.scope.contains(&var) {
            return self.err(format!("loop variable '{var}' shadows an enclosing loop"));
        }
        if self.arrays.contains_key(&var) || self.params.contains(&var) {
            return self.err(format!("loop variable '{var}' shadows a declaration"));
        }
        self.expect_punct("=")?;
        let lower = self.expr()?;
        self.expect_punct(";")?;
        let v2 = self.ident()?;
        if v2 != var || !self.is_punct("<") {
            return self.err("non-canonical loop: condition must be '<var> < <expr>'");
        }
        self.pos += 1;
        let upper = self.expr()?;
        self.expect_punct(";")?;
        let v3 = self.ident()?;
        if v3 != var || !self.is_punct("+=") {
            return self.err("non-canonical loop: increment must be '<var> += <positive int>'");
        }
        self.pos += 1;
        let step = match self.peek() {
            Some(Tok::Int(v)) if *v > 0 => *v,
            _ => return self.err("non-canonical loop: step must be a positive integer literal"),
        };
        self.pos += 1;
        self.expect_punct(")")?;
        self.scope.push(var.clone());
        let body = self.body();
        self.scope.pop();
        Ok(Stmt::For(ForLoop {
            var,
            lower,
            upper,
            step,
            parallel,
            pragmas,
            body: body?,
            meta: LoopMeta::default(),
        }))
    }

    fn assign(&mut self) -> Result<Stmt, ParseError> {
        let id = StmtId(self.next_id);
        self.next_id += 1;
        let (id, iter) = if self.eat_punct("@") {
            let name = match self.peek() {
                Some(Tok::Ident(s)) => s.clone(),
                _ => return self.err("expected statement tag 's<k>'"),
            };
            let k = name
                .strip_prefix('s')
                .and_then(|d| d.parse::<usize>().ok())
                .filter(|_| name.len() > 1 && name[1..].chars().all(|c| c.is_ascii_digit()));
            let Some(k) = k else {
                return self.err("expected statement tag 's<k>'");
            };
            self.pos += 1;
            self.expect_punct("(")?;
            let mut iter = Vec::new();
            if !self.eat_punct(")") {
                loop {
                    iter.push(self.expr()?);
                    if self.eat_punct(")") {
                        break;
                    }
                    self.expect_punct(",")?;
                }
            }
            (StmtId(k), iter)
        } else {
            (id, self.scope.iter().map(|v| Expr::Var(v.clone())).collect())
        };
        let target = self.array_ref()?;
        let op = if self.eat_punct("=") {
            AssignOp::Set
        } else if self.eat_punct("+=") {
            AssignOp::Add
        } else {
            return self.err("expected '=' or '+='");
        };
        let value = self.expr()?;
        self.expect_punct(";")?;
        Ok(Stmt::Assign(Assign {
            id,
            iter,
            target,
            op,
            value,
        }))
    }

    fn array_ref(&mut self) -> Result<ArrayRef, ParseError> {
        let array = self.ident()?;
        let Some(&rank) = self.arrays.get(&array) else {
            return self.err(format!("undeclared array '{array}'"));
        };
        let mut indices = Vec::new();
        self.expect_punct("[")?;
        loop {
            indices.push(self.expr()?);
            if self.eat_punct(",") {
                continue;
            }
            self.expect_punct("]")?;
            if self.eat_punct("[") {
                continue;
            }
            break;
        }
        if indices.len() != rank {
            return self.err(format!(
                "array '{array}' has {rank} dimension(s), got {} subscript(s)",
                indices.len()
            ));
        }
        Ok(ArrayRef { array, indices })
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.binary(1)
    }

    fn binop(&self) -> Option<BinOp> {
        let Some(Tok::Punct(p)) = self.peek() else { return None };
        let op = match *p {
            "+" => BinOp::Add,
            "-" => BinOp::Sub,
            "*" => BinOp::Mul,
            "/" => BinOp::Div,
            "%" => BinOp::Rem,
            "<" => BinOp::Lt,
            "<=" => BinOp::Le,
            ">" => BinOp::Gt,
            ">=" => BinOp::Ge,
            "==" => BinOp::Eq,
            "!=" => BinOp::Ne,
            "&&" => BinOp::And,
            "||" => BinOp::Or,
            _ => return None,
        };
        Some(op)
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop() {
            if op.precedence() < min_prec {
                break;
            }
            self.pos += 1;
            let rhs = self.binary(op.precedence() + 1)?;
            lhs = Expr::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat_punct("-") {
            if let Some(Tok::Int(v)) = self.peek() {
                let v = -*v;
                self.pos += 1;
                return Ok(Expr::Int(v));
            }
            return Ok(Expr::Unary(UnOp::Neg, Box::new(self.unary()?)));
        }
        if self.eat_punct("!") {
            return Ok(Expr::Unary(UnOp::Not, Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        if self.eat_punct("(") {
            let e = self.expr()?;
            self.expect_punct(")")?;
            return Ok(e);
        }
        match self.peek().cloned() {
            Some(Tok::Int(v)) => {
                self.pos += 1;
                Ok(Expr::Int(v))
            }
            Some(Tok::Ident(w)) if w == "min" || w == "max" => {
                self.pos += 1;
                self.expect_punct("(")?;
                let a = self.expr()?;
                self.expect_punct(",")?;
                let b = self.expr()?;
                self.expect_punct(")")?;
                Ok(if w == "min" { Expr::min(a, b) } else { Expr::max(a, b) })
            }
            Some(Tok::Ident(w)) if w == "disjoint" => {
                self.pos += 1;
                self.expect_punct("(")?;
                let a = self.ident()?;
                self.expect_punct(",")?;
                let b = self.ident()?;
                self.expect_punct(")")?;
                for n in [&a, &b] {
                    if !self.arrays.contains_key(n) {
                        return self.err(format!("undeclared array '{n}'"));
                    }
                }
                Ok(Expr::Disjoint(a, b))
            }
            Some(Tok::Ident(w)) => {
                if self.arrays.contains_key(&w) && matches!(self.peek_at(1), Some(Tok::Punct("["))) {
                    return Ok(Expr::Read(self.array_ref()?));
                }
                if self.scope.contains(&w) || self.params.contains(&w) {
                    self.pos += 1;
                    return Ok(Expr::Var(w));
                }
                self.err(format!("unknown variable '{w}'"))
            }
            _ => self.err("expected expression"),
        }
    }
}

/// Parses one directive line; `line`/`col` locate it in the enclosing file.
pub fn parse_directive_at(text: &str, line: usize, col: usize) -> Result<Directive, ParseError> {
    let toks = tokenize(text, false).map_err(|e| ParseError { line, col: col + e.col - 1, ..e })?;
    let mut pos = 0;
    let fail = |pos: usize, message: String| -> ParseError {
        let c = toks.get(pos).map(|t| t.col).unwrap_or(text.len() + 1);
        ParseError {
            line,
            col: col + c - 1,
            message,
        }
    };
    let word = |pos: usize| -> Option<&str> {
        match toks.get(pos).map(|t| &t.tok) {
            Some(Tok::Ident(s)) => Some(s.as_str()),
            _ => None,
        }
    };
    let punct = |pos: usize, p: &str| matches!(toks.get(pos).map(|t| &t.tok), Some(Tok::Punct(q)) if *q == p);

    if !punct(0, "#") || word(1) != Some("pragma") {
        return Err(fail(0, "expected '#pragma'".into()));
    }
    if word(2) != Some("xform") {
        return Err(fail(2, "unsupported pragma namespace, expected '#pragma xform'".into()));
    }
    pos += 3;
    let mut targets = Vec::new();
    if word(pos) == Some("loop") && punct(pos + 1, "(") {
        pos += 2;
        loop {
            match word(pos) {
                Some(n) => targets.push(n.to_string()),
                None => return Err(fail(pos, "expected loop name".into())),
            }
            pos += 1;
            if punct(pos, ",") {
                pos += 1;
                continue;
            }
            if punct(pos, ")") {
                pos += 1;
                break;
            }
            return Err(fail(pos, "expected ',' or ')'".into()));
        }
    }
    let Some(kw) = word(pos) else {
        return Err(fail(pos, "expected transformation name".into()));
    };
    let Some(kind) = TransformKind::from_keyword(kw) else {
        return Err(fail(pos, format!("unknown transformation '{kw}'")));
    };
    pos += 1;
    let mut clauses = Vec::new();
    let mut mode = None;
    let mut required = false;
    while pos < toks.len() {
        let Some(name) = word(pos) else {
            return Err(fail(pos, "expected clause".into()));
        };
        match name {
            "fallback" | "force" => {
                if mode.is_some() {
                    return Err(fail(pos, "conflicting safety modifiers".into()));
                }
                mode = Some(if name == "force" { SafetyMode::Force } else { SafetyMode::Fallback });
                pos += 1;
                continue;
            }
            "required" => {
                if required {
                    return Err(fail(pos, "duplicate 'required'".into()));
                }
                required = true;
                pos += 1;
                continue;
            }
            _ => {}
        }
        let clause_pos = pos;
        pos += 1;
        let args = if punct(pos, "(") {
            pos += 1;
            let mut items = Vec::new();
            loop {
                let mut group: Vec<String> = Vec::new();
                let mut item = None;
                loop {
                    match toks.get(pos).map(|t| &t.tok) {
                        Some(Tok::Int(v)) if group.is_empty() && item.is_none() => {
                            item = Some(ClauseItem::Int(*v));
                            pos += 1;
                        }
                        Some(Tok::Punct("-")) if group.is_empty() && item.is_none() => {
                            match toks.get(pos + 1).map(|t| &t.tok) {
                                Some(Tok::Int(v)) => {
                                    item = Some(ClauseItem::Int(-*v));
                                    pos += 2;
                                }
                                _ => return Err(fail(pos, "malformed clause argument".into())),
                            }
                        }
                        Some(Tok::Ident(s)) if item.is_none() => {
                            group.push(s.clone());
                            pos += 1;
                        }
                        _ => break,
                    }
                }
                let item = match (item, group.len()) {
                    (Some(i), 0) => i,
                    (None, 1) => ClauseItem::Ident(group.remove(0)),
                    (None, n) if n > 1 => ClauseItem::Group(group),
                    _ => return Err(fail(pos, format!("malformed argument in clause '{name}'"))),
                };
                items.push(item);
                if punct(pos, ",") {
                    pos += 1;
                    continue;
                }
                if punct(pos, ")") {
                    pos += 1;
                    break;
                }
                return Err(fail(pos, format!("malformed clause '{name}'")));
            }
            Some(items)
        } else {
            None
        };
        if clauses.iter().any(|c: &Clause| c.name == name) {
            return Err(fail(clause_pos, format!("duplicate clause '{name}'")));
        }
        clauses.push(Clause {
            name: name.to_string(),
            args,
        });
    }
    if let Err(e) = validate_clauses(kind, &clauses) {
        return Err(fail(pos, e.to_string()));
    }
    Ok(Directive {
        targets,
        kind,
        clauses,
        mode,
        required,
        line,
    })
}
