//! Abstract syntax of the loop language.
//!
//! Programs consist of declarations (arrays, parameters, may-alias pairs)
//! followed by statements. Every assignment carries a statement id and the
//! expressions that reconstruct its iteration vector in the coordinates of
//! the loops it was originally written in. For freshly parsed programs these
//! are simply the enclosing loop variables; transformations rewrite them so
//! that traces of transformed code stay comparable with the original.

use std::fmt;

use crate::directive::Directive;

/// Identity of a source statement (`s<k>` in source preorder).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StmtId(pub usize);

impl fmt::Display for StmtId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    Zero,
    Random,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrayDecl {
    pub name: String,
    pub dims: Vec<usize>,
    pub init: Init,
}

impl ArrayDecl {
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamDecl {
    pub name: String,
    pub value: i64,
    /// Opaque parameters have a runtime value but are treated as unknown
    /// symbols by the analyses.
    pub opaque: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decl {
    Array(ArrayDecl),
    MaybeAlias(String, String),
    Param(ParamDecl),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Binding strength; higher binds tighter. All binary operators are
    /// left-associative.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrayRef {
    pub array: String,
    pub indices: Vec<Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Int(i64),
    Var(String),
    Read(ArrayRef),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Builtin, Box<Expr>, Box<Expr>),
    /// True iff the storage of the two arrays does not overlap.
    Disjoint(String, String),
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn bin(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn min(lhs: Expr, rhs: Expr) -> Expr {
        Expr::Call(Builtin::Min, Box::new(lhs), Box::new(rhs))
    }

    pub fn max(lhs: Expr, rhs: Expr) -> Expr {
        Expr::Call(Builtin::Max, Box::new(lhs), Box::new(rhs))
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Expr::Int(v) => Some(*v),
            _ => None,
        }
    }

    /// Visits every sub-expression, parents before children.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Int(_) | Expr::Var(_) | Expr::Disjoint(..) => {}
            Expr::Read(r) => r.indices.iter().for_each(|e| e.walk(f)),
            Expr::Unary(_, e) => e.walk(f),
            Expr::Binary(_, a, b) | Expr::Call(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
        }
    }

    pub fn mentions_var(&self, name: &str) -> bool {
        let mut found = false;
        self.walk(&mut |e| {
            if let Expr::Var(v) = e {
                if v == name {
                    found = true;
                }
            }
        });
        found
    }

    pub fn reads_memory(&self) -> bool {
        let mut found = false;
        self.walk(&mut |e| {
            if matches!(e, Expr::Read(_) | Expr::Disjoint(..)) {
                found = true;
            }
        });
        found
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignOp {
    Set,
    Add,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assign {
    pub id: StmtId,
    /// Original iteration vector, one expression per loop the statement was
    /// written in (outermost first).
    pub iter: Vec<Expr>,
    pub target: ArrayRef,
    pub op: AssignOp,
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForLoop {
    pub var: String,
    pub lower: Expr,
    pub upper: Expr,
    pub step: i64,
    pub parallel: bool,
    /// Directive stack, index 0 is the pragma nearest to the loop.
    pub pragmas: Vec<Directive>,
    pub body: Vec<Stmt>,
    pub meta: LoopMeta,
}

/// Bookkeeping carried through transformations. It never takes part in
/// structural equality and is not printed.
#[derive(Debug, Clone, Default)]
pub struct LoopMeta {
    /// Resolved loop name; `None` until names are assigned.
    pub name: Option<String>,
    /// Index of the pipeline directive that generated the loop.
    pub origin: Option<usize>,
}

impl PartialEq for LoopMeta {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for LoopMeta {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WhileLoop {
    pub cond: Expr,
    pub pragmas: Vec<Directive>,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IfStmt {
    pub cond: Expr,
    pub then_body: Vec<Stmt>,
    pub else_body: Option<Vec<Stmt>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    For(ForLoop),
    While(WhileLoop),
    If(IfStmt),
    Assign(Assign),
    Block(Vec<Stmt>),
}

impl Stmt {
    /// Child statement lists in order (an `if` yields then- and else-branch).
    pub fn child_lists(&self) -> Vec<&Vec<Stmt>> {
        match self {
            Stmt::For(f) => vec![&f.body],
            Stmt::While(w) => vec![&w.body],
            Stmt::If(i) => {
                let mut v = vec![&i.then_body];
                if let Some(e) = &i.else_body {
                    v.push(e);
                }
                v
            }
            Stmt::Block(b) => vec![b],
            Stmt::Assign(_) => vec![],
        }
    }

    pub fn child_lists_mut(&mut self) -> Vec<&mut Vec<Stmt>> {
        match self {
            Stmt::For(f) => vec![&mut f.body],
            Stmt::While(w) => vec![&mut w.body],
            Stmt::If(i) => {
                let mut v = vec![&mut i.then_body];
                if let Some(e) = &mut i.else_body {
                    v.push(e);
                }
                v
            }
            Stmt::Block(b) => vec![b],
            Stmt::Assign(_) => vec![],
        }
    }

    /// Assignments in preorder.
    pub fn assigns(&self) -> Vec<&Assign> {
        let mut out = Vec::new();
        collect_assigns(std::slice::from_ref(self), &mut out);
        out
    }

    pub fn contains_while(&self) -> bool {
        match self {
            Stmt::While(_) => true,
            other => other
                .child_lists()
                .into_iter()
                .any(|l| l.iter().any(Stmt::contains_while)),
        }
    }
}

fn collect_assigns<'a>(stmts: &'a [Stmt], out: &mut Vec<&'a Assign>) {
    for s in stmts {
        if let Stmt::Assign(a) = s {
            out.push(a);
        }
        for l in s.child_lists() {
            collect_assigns(l, out);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Program {
    pub decls: Vec<Decl>,
    pub body: Vec<Stmt>,
}

impl Program {
    pub fn arrays(&self) -> impl Iterator<Item = &ArrayDecl> {
        self.decls.iter().filter_map(|d| match d {
            Decl::Array(a) => Some(a),
            _ => None,
        })
    }

    pub fn params(&self) -> impl Iterator<Item = &ParamDecl> {
        self.decls.iter().filter_map(|d| match d {
            Decl::Param(p) => Some(p),
            _ => None,
        })
    }

    pub fn alias_pairs(&self) -> Vec<(String, String)> {
        self.decls
            .iter()
            .filter_map(|d| match d {
                Decl::MaybeAlias(a, b) => Some((a.clone(), b.clone())),
                _ => None,
            })
            .collect()
    }

    pub fn array(&self, name: &str) -> Option<&ArrayDecl> {
        self.arrays().find(|a| a.name == name)
    }

    pub fn param(&self, name: &str) -> Option<&ParamDecl> {
        self.params().find(|p| p.name == name)
    }

    /// Values of every parameter the analyses may treat as constants.
    pub fn known_params(&self) -> Vec<(String, i64)> {
        self.params()
            .filter(|p| !p.opaque)
            .map(|p| (p.name.clone(), p.value))
            .collect()
    }

    pub fn assigns(&self) -> Vec<&Assign> {
        let mut out = Vec::new();
        collect_assigns(&self.body, &mut out);
        out
    }

    /// Copy of the program with every directive stack removed.
    pub fn without_pragmas(&self) -> Program {
        fn strip(stmts: &mut [Stmt]) {
            for s in stmts {
                match s {
                    Stmt::For(f) => f.pragmas.clear(),
                    Stmt::While(w) => w.pragmas.clear(),
                    _ => {}
                }
                for l in s.child_lists_mut() {
                    strip(l);
                }
            }
        }
        let mut p = self.clone();
        strip(&mut p.body);
        p
    }

    /// Names that loop variables must not shadow.
    pub fn global_names(&self) -> Vec<String> {
        self.decls
            .iter()
            .filter_map(|d| match d {
                Decl::Array(a) => Some(a.name.clone()),
                Decl::Param(p) => Some(p.name.clone()),
                Decl::MaybeAlias(..) => None,
            })
            .collect()
    }
}
