//! Peeling leading or trailing iterations.

use super::*;
use crate::directive::PeelSpec;

/// Logical loop over `[lo, hi)` running the body for `v = lb + t * s`.
fn piece(f: &ForLoop, var: &str, lo: Expr, hi: Expr, label: &str, origin: Option<usize>) -> Stmt {
    let mut body = subst_stmts(&f.body, &[(f.var.clone(), physical(f, Expr::var(var)))]);
    rename_copies(&mut body, label);
    new_loop(var, lo, hi, 1, f.parallel, body, var, origin)
}

pub(super) fn peel(ctx: &Ctx) -> Prep {
    let Request::Peel { spec, .. } = &ctx.step.request else {
        unreachable!()
    };
    let name = ctx.step.first_target();
    let (idx, f) = ctx.domain_loop(name)?;
    let t = trip(f);
    let origin = ctx.origin();
    let produces = &ctx.step.produces;
    let main_loop = |lower: Expr, upper: Expr, main: &str| {
        let mut m = f.clone();
        m.lower = lower;
        m.upper = upper;
        m.meta.name = Some(main.to_string());
        m.meta.origin = origin;
        Stmt::For(m)
    };
    let replacement = match (*spec, produces.as_slice()) {
        (PeelSpec::First(k), [pro, main]) => {
            if k == 0 {
                vec![main_loop(f.lower.clone(), f.upper.clone(), main)]
            } else {
                let count = match ctx.concrete(&t) {
                    Some(n) => Expr::Int(k.min(n.max(0))),
                    None => min(Expr::Int(k), t.clone()),
                };
                vec![
                    piece(f, pro, Expr::Int(0), count.clone(), "pro", origin),
                    main_loop(physical(f, count), f.upper.clone(), main),
                ]
            }
        }
        (PeelSpec::Last(0), [main, _]) => vec![main_loop(f.lower.clone(), f.upper.clone(), main)],
        (PeelSpec::Last(_) | PeelSpec::Multiple(_), [main, epi]) => {
            let keep = match (*spec, ctx.concrete(&t)) {
                (PeelSpec::Last(k), Some(n)) => Expr::Int((n - k).max(0)),
                (PeelSpec::Last(k), None) => sub(t.clone(), min(Expr::Int(k), t.clone())),
                (PeelSpec::Multiple(m), Some(n)) => Expr::Int(n.max(0) / m * m),
                (PeelSpec::Multiple(m), None) => {
                    if ctx.prog.params().any(|p| p.opaque && t.mentions_var(&p.name)) {
                        return Err(format!(
                            "peeling to a multiple of {m} needs a computable trip count; loop '{name}' runs {} times",
                            crate::emit::expr(&t)
                        ));
                    }
                    mul(simplify(&Expr::bin(BinOp::Div, t.clone(), Expr::Int(m))), Expr::Int(m))
                }
                _ => unreachable!(),
            };
            vec![
                main_loop(f.lower.clone(), physical(f, keep.clone()), main),
                piece(f, epi, keep, t.clone(), "epi", origin),
            ]
        }
        _ => return Err("could not name the generated loops".into()),
    };
    Ok(Prepared {
        path: ctx.tree.nodes[idx].path.clone(),
        len: 1,
        replacement,
        check: Check::OrderPreserving,
        analyze_result: false,
        parts_loop: None,
    })
}
