//! Affine forms over named variables, used for bound arithmetic,
//! substitution and subscript analysis.

use std::collections::BTreeMap;

use crate::ast::{BinOp, Builtin, Expr, UnOp};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Affine {
    pub coeffs: BTreeMap<String, i64>,
    pub constant: i64,
}

impl Affine {
    pub fn constant(c: i64) -> Affine {
        Affine {
            coeffs: BTreeMap::new(),
            constant: c,
        }
    }

    pub fn var(name: &str) -> Affine {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(name.to_string(), 1);
        Affine { coeffs, constant: 0 }
    }

    pub fn as_constant(&self) -> Option<i64> {
        self.coeffs.is_empty().then_some(self.constant)
    }

    pub fn coeff(&self, name: &str) -> i64 {
        self.coeffs.get(name).copied().unwrap_or(0)
    }

    fn normalize(mut self) -> Affine {
        self.coeffs.retain(|_, c| *c != 0);
        self
    }

    pub fn add(&self, other: &Affine) -> Option<Affine> {
        let mut out = self.clone();
        for (v, c) in &other.coeffs {
            let e = out.coeffs.entry(v.clone()).or_insert(0);
            *e = e.checked_add(*c)?;
        }
        out.constant = out.constant.checked_add(other.constant)?;
        Some(out.normalize())
    }

    pub fn scale(&self, k: i64) -> Option<Affine> {
        let mut coeffs = BTreeMap::new();
        for (v, c) in &self.coeffs {
            coeffs.insert(v.clone(), c.checked_mul(k)?);
        }
        Some(
            Affine {
                coeffs,
                constant: self.constant.checked_mul(k)?,
            }
            .normalize(),
        )
    }

    pub fn sub(&self, other: &Affine) -> Option<Affine> {
        self.add(&other.scale(-1)?)
    }

    /// Converts an expression built from integers, variables, `+`, `-`
    /// and multiplication by constants. `resolve` may map a variable to a
    /// constant (e.g. a known parameter).
    pub fn from_expr(e: &Expr, resolve: &dyn Fn(&str) -> Option<i64>) -> Option<Affine> {
        match e {
            Expr::Int(v) => Some(Affine::constant(*v)),
            Expr::Var(v) => Some(match resolve(v) {
                Some(c) => Affine::constant(c),
                None => Affine::var(v),
            }),
            Expr::Unary(UnOp::Neg, x) => Affine::from_expr(x, resolve)?.scale(-1),
            Expr::Binary(BinOp::Add, a, b) => {
                Affine::from_expr(a, resolve)?.add(&Affine::from_expr(b, resolve)?)
            }
            Expr::Binary(BinOp::Sub, a, b) => {
                Affine::from_expr(a, resolve)?.sub(&Affine::from_expr(b, resolve)?)
            }
            Expr::Binary(BinOp::Mul, a, b) => {
                let a = Affine::from_expr(a, resolve)?;
                let b = Affine::from_expr(b, resolve)?;
                match (a.as_constant(), b.as_constant()) {
                    (Some(k), _) => b.scale(k),
                    (_, Some(k)) => a.scale(k),
                    _ => None,
                }
            }
            _ => None,
        }
    }

    /// Canonical expression: variable terms in name order, constant last.
    pub fn to_expr(&self) -> Expr {
        let mut acc: Option<Expr> = None;
        for (v, &c) in &self.coeffs {
            let mag = c.unsigned_abs() as i64;
            let term = if mag == 1 {
                Expr::var(v)
            } else {
                Expr::bin(BinOp::Mul, Expr::Int(mag), Expr::var(v))
            };
            acc = Some(match acc {
                None if c < 0 => {
                    if mag == 1 {
                        Expr::Unary(UnOp::Neg, Box::new(term))
                    } else {
                        Expr::bin(BinOp::Mul, Expr::Int(c), Expr::var(v))
                    }
                }
                None => term,
                Some(a) if c < 0 => Expr::bin(BinOp::Sub, a, term),
                Some(a) => Expr::bin(BinOp::Add, a, term),
            });
        }
        match acc {
            None => Expr::Int(self.constant),
            Some(a) if self.constant > 0 => Expr::bin(BinOp::Add, a, Expr::Int(self.constant)),
            Some(a) if self.constant < 0 => match self.constant.checked_neg() {
                Some(m) => Expr::bin(BinOp::Sub, a, Expr::Int(m)),
                None => Expr::bin(BinOp::Add, a, Expr::Int(self.constant)),
            },
            Some(a) => a,
        }
    }
}

fn no_resolve(_: &str) -> Option<i64> {
    None
}

/// Algebraic simplification: affine sub-expressions are put in canonical
/// form, constants are folded and `min`/`max` with a provable winner are
/// eliminated.
pub fn simplify(e: &Expr) -> Expr {
    if let Some(a) = Affine::from_expr(e, &no_resolve) {
        return a.to_expr();
    }
    match e {
        Expr::Int(_) | Expr::Var(_) | Expr::Disjoint(..) => e.clone(),
        Expr::Read(r) => Expr::Read(crate::ast::ArrayRef {
            array: r.array.clone(),
            indices: r.indices.iter().map(simplify).collect(),
        }),
        Expr::Unary(op, x) => {
            let x = simplify(x);
            match (op, x.as_int()) {
                (UnOp::Not, Some(v)) => Expr::Int((v == 0) as i64),
                _ => Expr::Unary(*op, Box::new(x)),
            }
        }
        Expr::Binary(op, a, b) => {
            let a = simplify(a);
            let b = simplify(b);
            if let (Some(x), Some(y)) = (a.as_int(), b.as_int()) {
                if let Some(v) = fold(*op, x, y) {
                    return Expr::Int(v);
                }
            }
            match (op, b.as_int()) {
                (BinOp::Div, Some(1)) => a,
                (BinOp::Mul, Some(1)) => a,
                _ => Expr::bin(*op, a, b),
            }
        }
        Expr::Call(f, a, b) => {
            let a = simplify(a);
            let b = simplify(b);
            if a == b {
                return a;
            }
            if let (Some(x), Some(y)) = (
                Affine::from_expr(&a, &no_resolve),
                Affine::from_expr(&b, &no_resolve),
            ) {
                if let Some(d) = x.sub(&y).and_then(|d| d.as_constant()) {
                    let a_wins = match f {
                        Builtin::Min => d <= 0,
                        Builtin::Max => d >= 0,
                    };
                    return if a_wins { a } else { b };
                }
            }
            Expr::Call(*f, Box::new(a), Box::new(b))
        }
    }
}

fn fold(op: BinOp, x: i64, y: i64) -> Option<i64> {
    Some(match op {
        BinOp::Add => x.checked_add(y)?,
        BinOp::Sub => x.checked_sub(y)?,
        BinOp::Mul => x.checked_mul(y)?,
        BinOp::Div => x.checked_div(y)?,
        BinOp::Rem => x.checked_rem(y)?,
        BinOp::Lt => (x < y) as i64,
        BinOp::Le => (x <= y) as i64,
        BinOp::Gt => (x > y) as i64,
        BinOp::Ge => (x >= y) as i64,
        BinOp::Eq => (x == y) as i64,
        BinOp::Ne => (x != y) as i64,
        BinOp::And => (x != 0 && y != 0) as i64,
        BinOp::Or => (x != 0 || y != 0) as i64,
    })
}

/// Replaces variables by expressions. The result is simplified; untouched
/// expressions are returned unchanged.
pub fn substitute(e: &Expr, map: &[(String, Expr)]) -> Expr {
    if !map.iter().any(|(v, _)| e.mentions_var(v)) {
        return e.clone();
    }
    simplify(&replace(e, map))
}

fn replace(e: &Expr, map: &[(String, Expr)]) -> Expr {
    match e {
        Expr::Var(v) => match map.iter().find(|(n, _)| n == v) {
            Some((_, r)) => r.clone(),
            None => e.clone(),
        },
        Expr::Int(_) | Expr::Disjoint(..) => e.clone(),
        Expr::Read(r) => Expr::Read(crate::ast::ArrayRef {
            array: r.array.clone(),
            indices: r.indices.iter().map(|i| replace(i, map)).collect(),
        }),
        Expr::Unary(op, x) => Expr::Unary(*op, Box::new(replace(x, map))),
        Expr::Binary(op, a, b) => Expr::bin(*op, replace(a, map), replace(b, map)),
        Expr::Call(f, a, b) => Expr::Call(*f, Box::new(replace(a, map)), Box::new(replace(b, map))),
    }
}

/// Evaluates an expression that only depends on the given variables.
pub fn eval_const(e: &Expr, resolve: &dyn Fn(&str) -> Option<i64>) -> Option<i64> {
    match e {
        Expr::Int(v) => Some(*v),
        Expr::Var(v) => resolve(v),
        Expr::Read(_) | Expr::Disjoint(..) => None,
        Expr::Unary(UnOp::Neg, x) => eval_const(x, resolve)?.checked_neg(),
        Expr::Unary(UnOp::Not, x) => Some((eval_const(x, resolve)? == 0) as i64),
        Expr::Binary(op, a, b) => fold(*op, eval_const(a, resolve)?, eval_const(b, resolve)?),
        Expr::Call(f, a, b) => {
            let (x, y) = (eval_const(a, resolve)?, eval_const(b, resolve)?);
            Some(match f {
                Builtin::Min => x.min(y),
                Builtin::Max => x.max(y),
            })
        }
    }
}
